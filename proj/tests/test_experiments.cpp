#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "nmslab/config.hpp"
#include "nmslab/experiments.hpp"

using namespace nmslab;
using nlohmann::json;

namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "nmslab-tests" / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

json read_summary(const fs::path& dir) { return json::parse(slurp(dir / "summary.json")); }

}  // namespace

TEST_CASE("run config json round trip") {
  json j = {
      {"kind", "amplify-sweep"},
      {"out_dir", "runs/x"},
      {"master_seed", 42},
      {"detector", {{"gain", 80.0}, {"nms_variant", "random_delay"},
                    {"delay", {{"family", "uniform"}, {"lo", 0.0}, {"hi", 0.01}}}}},
      {"clock", {{"mode", "modeled"}, {"repeats", 3},
                 {"noise", {{"family", "gaussian"}, {"sigma", 1e-6}}}}},
      {"params", {{"scenes", 10}}},
  };
  const RunConfig config = RunConfig::from_json(j);
  CHECK(config.kind == ExperimentKind::amplify_sweep);
  CHECK(config.master_seed == 42);
  CHECK(config.detector.gain == 80.0);
  CHECK(config.detector.nms_variant == NmsVariant::random_delay);
  CHECK(config.clock.repeats == 3);
  CHECK(config.clock.noise.sigma == 1e-6);

  const RunConfig back = RunConfig::from_json(config.to_json());
  CHECK(back.detector.gain == config.detector.gain);
  CHECK(back.params == config.params);
}

TEST_CASE("invalid configs are rejected with a diagnostic") {
  CHECK_THROWS_AS(experiment_kind_from_string("no-such-kind"), std::invalid_argument);
  json j = {{"kind", "profile"}, {"detector", {{"gain", -1.0}}}};
  CHECK_THROWS_AS(RunConfig::from_json(j), std::invalid_argument);
}

TEST_CASE("fp bound curve run emits a monotone table") {
  RunConfig config;
  config.kind = ExperimentKind::fp_bound_curve;
  config.out_dir = temp_dir("fp-curve");
  const auto dir = run(config);

  const json summary = read_summary(dir);
  CHECK(summary.at("monotone_decreasing").get<bool>());

  const std::string csv = slurp(dir / "fp_bound.csv");
  CHECK(csv.rfind("target_size,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + (2000 - 50) / 50 + 1);
}

TEST_CASE("profile run emits per-scene rows and a positive correlation") {
  RunConfig config;
  config.kind = ExperimentKind::profile;
  config.out_dir = temp_dir("profile");
  config.master_seed = 3;
  config.params = {{"scenes", 40}, {"max_objects", 6}, {"raster_dim", 416}};
  const auto dir = run(config);

  const json summary = read_summary(dir);
  CHECK(summary.at("rho_objects_nms_time").get<double>() > 0.8);

  const std::string csv = slurp(dir / "profile.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 41);
}

TEST_CASE("calibrate run recovers the configured slope noiselessly") {
  RunConfig config;
  config.kind = ExperimentKind::calibrate;
  config.out_dir = temp_dir("calibrate");
  const auto dir = run(config);
  const json summary = read_summary(dir);
  CHECK(summary.at("slope_per_pixel").get<double>() ==
        doctest::Approx(config.detector.neural_cost_per_pixel).epsilon(1e-9));
  CHECK(summary.at("r_squared").get<double>() == doctest::Approx(1.0));
}

TEST_CASE("modeled runs replay byte-identically from the master seed") {
  auto run_once = [](const fs::path& out) {
    RunConfig config;
    config.kind = ExperimentKind::amplify_sweep;
    config.out_dir = out;
    config.master_seed = 11;
    config.params = {{"scenes", 30}, {"ks", {1, 3}}, {"raster_dim", 160}};
    return run(config);
  };
  const auto a = run_once(temp_dir("digest-a"));
  const auto b = run_once(temp_dir("digest-b"));
  for (const char* name : {"leakage.csv", "correlations.csv", "summary.json"}) {
    CHECK(slurp(a / name) == slurp(b / name));
  }
}

TEST_CASE("failed runs leave a marker") {
  RunConfig config;
  config.kind = ExperimentKind::amplify_sweep;
  config.out_dir = temp_dir("failing");
  config.params = {{"scenes", 0}};  // no scenes: the run cannot proceed
  CHECK_THROWS(run(config));
  CHECK(fs::exists(config.out_dir / "FAILED"));
}

TEST_CASE("infer-dataset run decides both target kinds correctly") {
  for (bool target_is_member : {true, false}) {
    RunConfig config;
    config.kind = ExperimentKind::infer_dataset;
    config.out_dir = temp_dir(target_is_member ? "infer-m" : "infer-n");
    config.master_seed = 5;
    // Small sets with exaggerated crowd rates keep the smoke test fast.
    config.params = {{"reference_size", 50},
                     {"target_size", 30},
                     {"target_is_member", target_is_member},
                     {"crowd_prob_member", 0.3},
                     {"crowd_prob_nonmember", 0.05}};
    const auto dir = run(config);
    const json summary = read_summary(dir);
    CHECK(summary.at("decision") == (target_is_member ? "member" : "nonmember"));
    const std::string csv = slurp(dir / "samples.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 50 + 50 + 30);
  }
}

TEST_CASE("countermeasure evaluation preserves detections and flattens timing") {
  RunConfig config;
  config.kind = ExperimentKind::countermeasure_eval;
  config.out_dir = temp_dir("countermeasures");
  config.master_seed = 9;
  config.detector.constant_time_capacity = 64;
  config.params = {{"scenes", 80}};
  const auto dir = run(config);
  const json summary = read_summary(dir);
  for (const auto& v : summary.at("variants")) {
    CHECK(v.at("detections_match").get<bool>());
    if (v.at("variant") == "greedy") {
      CHECK(v.at("rho_time").get<double>() > 0.8);
    }
    if (v.at("variant") == "constant_time") {
      CHECK(std::fabs(v.at("rho_time").get<double>()) < 0.3);  // null scale at n = 80
    }
  }
}
