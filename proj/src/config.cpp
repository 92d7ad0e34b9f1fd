#include "nmslab/config.hpp"

namespace nmslab {

using nlohmann::json;

json to_json(const NoiseSpec& spec) {
  json j;
  j["family"] = to_string(spec.family);
  switch (spec.family) {
    case NoiseSpec::Family::none:
      break;
    case NoiseSpec::Family::constant:
      j["value"] = spec.value;
      break;
    case NoiseSpec::Family::gaussian:
      j["mean"] = spec.mean;
      j["sigma"] = spec.sigma;
      break;
    case NoiseSpec::Family::uniform:
      j["lo"] = spec.lo;
      j["hi"] = spec.hi;
      break;
    case NoiseSpec::Family::shifted_lognormal:
      j["shift"] = spec.shift;
      j["log_mean"] = spec.log_mean;
      j["log_sigma"] = spec.sigma;
      break;
  }
  return j;
}

NoiseSpec noise_from_json(const json& j) {
  const auto family = noise_family_from_string(j.value("family", "none"));
  switch (family) {
    case NoiseSpec::Family::none:
      return NoiseSpec::none();
    case NoiseSpec::Family::constant:
      return NoiseSpec::constant(j.value("value", 0.0));
    case NoiseSpec::Family::gaussian:
      return NoiseSpec::gaussian(j.value("sigma", 0.0), j.value("mean", 0.0));
    case NoiseSpec::Family::uniform:
      return NoiseSpec::uniform(j.value("lo", 0.0), j.value("hi", 0.0));
    case NoiseSpec::Family::shifted_lognormal:
      return NoiseSpec::shifted_lognormal(j.value("shift", 0.0), j.value("log_mean", 0.0),
                                          j.value("log_sigma", 0.0));
  }
  return NoiseSpec::none();
}

std::string to_string(NmsVariant variant) {
  switch (variant) {
    case NmsVariant::greedy: return "greedy";
    case NmsVariant::constant_time: return "constant_time";
    case NmsVariant::random_delay: return "random_delay";
  }
  return "greedy";
}

namespace {

NmsVariant variant_from_string(const std::string& name) {
  if (name == "greedy") return NmsVariant::greedy;
  if (name == "constant_time") return NmsVariant::constant_time;
  if (name == "random_delay") return NmsVariant::random_delay;
  throw std::invalid_argument("unknown nms_variant: " + name);
}

}  // namespace

json to_json(const SyntheticDetectorConfig& config) {
  return json{
      {"stride", config.grid.stride},
      {"window", config.grid.window},
      {"box_size", config.grid.box_size},
      {"weight_seed", config.weight_seed},
      {"gain", config.gain},
      {"black_score", config.black_score},
      {"detection_threshold", config.detection_threshold},
      {"nms_threshold", config.nms_threshold},
      {"nms_cost",
       {{"per_comparison", config.nms_cost.cost_per_comparison},
        {"per_iteration", config.nms_cost.cost_per_iteration},
        {"fixed", config.nms_cost.fixed_cost}}},
      {"neural_cost_per_pixel", config.neural_cost_per_pixel},
      {"neural_cost_fixed", config.neural_cost_fixed},
      {"nms_variant", to_string(config.nms_variant)},
      {"constant_time_capacity", config.constant_time_capacity},
      {"delay", to_json(config.delay_spec)},
  };
}

SyntheticDetectorConfig detector_from_json(const json& j) {
  SyntheticDetectorConfig config;
  config.grid.stride = j.value("stride", config.grid.stride);
  config.grid.window = j.value("window", config.grid.window);
  config.grid.box_size = j.value("box_size", config.grid.box_size);
  config.weight_seed = j.value("weight_seed", config.weight_seed);
  config.gain = j.value("gain", config.gain);
  config.black_score = j.value("black_score", config.black_score);
  config.detection_threshold = j.value("detection_threshold", config.detection_threshold);
  config.nms_threshold = j.value("nms_threshold", config.nms_threshold);
  if (j.contains("nms_cost")) {
    const auto& c = j.at("nms_cost");
    config.nms_cost.cost_per_comparison =
        c.value("per_comparison", config.nms_cost.cost_per_comparison);
    config.nms_cost.cost_per_iteration =
        c.value("per_iteration", config.nms_cost.cost_per_iteration);
    config.nms_cost.fixed_cost = c.value("fixed", config.nms_cost.fixed_cost);
  }
  config.neural_cost_per_pixel = j.value("neural_cost_per_pixel", config.neural_cost_per_pixel);
  config.neural_cost_fixed = j.value("neural_cost_fixed", config.neural_cost_fixed);
  config.nms_variant = variant_from_string(j.value("nms_variant", "greedy"));
  config.constant_time_capacity = j.value("constant_time_capacity", config.constant_time_capacity);
  if (j.contains("delay")) config.delay_spec = noise_from_json(j.at("delay"));
  config.validate();
  return config;
}

std::string to_string(ClockMode mode) {
  switch (mode) {
    case ClockMode::modeled: return "modeled";
    case ClockMode::wall_clock: return "wall_clock";
    case ClockMode::remote_rtt: return "remote_rtt";
  }
  return "modeled";
}

namespace {

ClockMode clock_mode_from_string(const std::string& name) {
  if (name == "modeled") return ClockMode::modeled;
  if (name == "wall_clock") return ClockMode::wall_clock;
  if (name == "remote_rtt") return ClockMode::remote_rtt;
  throw std::invalid_argument("unknown clock mode: " + name);
}

}  // namespace

json to_json(const ClockSpec& spec) {
  return json{
      {"mode", to_string(spec.mode)},
      {"noise", to_json(spec.noise)},
      {"repeats", spec.repeats},
      {"rng_seed", spec.rng_seed},
  };
}

ClockSpec clock_from_json(const json& j) {
  ClockSpec spec;
  spec.mode = clock_mode_from_string(j.value("mode", "modeled"));
  if (j.contains("noise")) spec.noise = noise_from_json(j.at("noise"));
  spec.repeats = j.value("repeats", spec.repeats);
  spec.rng_seed = j.value("rng_seed", spec.rng_seed);
  spec.validate();
  return spec;
}

}  // namespace nmslab
