#include "nmslab/experiments.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include "nmslab/config.hpp"
#include "nmslab/evasion.hpp"
#include "nmslab/inference.hpp"
#include "nmslab/measurement.hpp"
#include "nmslab/scenes.hpp"
#include "nmslab/service.hpp"
#include "nmslab/stats.hpp"

namespace nmslab {

using nlohmann::json;

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::profile: return "profile";
    case ExperimentKind::amplify_sweep: return "amplify-sweep";
    case ExperimentKind::calibrate: return "calibrate";
    case ExperimentKind::evade: return "evade";
    case ExperimentKind::evade_baseline: return "evade-baseline";
    case ExperimentKind::lambda_sweep: return "lambda-sweep";
    case ExperimentKind::infer_dataset: return "infer-dataset";
    case ExperimentKind::fp_bound_curve: return "fp-bound-curve";
    case ExperimentKind::countermeasure_eval: return "countermeasure-eval";
    case ExperimentKind::serve: return "serve";
  }
  return "profile";
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
  static const std::map<std::string, ExperimentKind> kinds = {
      {"profile", ExperimentKind::profile},
      {"amplify-sweep", ExperimentKind::amplify_sweep},
      {"calibrate", ExperimentKind::calibrate},
      {"evade", ExperimentKind::evade},
      {"evade-baseline", ExperimentKind::evade_baseline},
      {"lambda-sweep", ExperimentKind::lambda_sweep},
      {"infer-dataset", ExperimentKind::infer_dataset},
      {"fp-bound-curve", ExperimentKind::fp_bound_curve},
      {"countermeasure-eval", ExperimentKind::countermeasure_eval},
      {"serve", ExperimentKind::serve},
  };
  const auto it = kinds.find(name);
  if (it == kinds.end()) throw std::invalid_argument("unknown experiment kind: " + name);
  return it->second;
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig config;
  config.kind = experiment_kind_from_string(j.value("kind", "profile"));
  config.out_dir = j.value("out_dir", std::string("runs"));
  config.master_seed = j.value("master_seed", config.master_seed);
  config.detector =
      j.contains("detector") ? detector_from_json(j.at("detector")) : SyntheticDetectorConfig{};
  config.clock = j.contains("clock") ? clock_from_json(j.at("clock")) : ClockSpec{};
  config.params = j.value("params", json::object());
  return config;
}

json RunConfig::to_json() const {
  return json{
      {"kind", nmslab::to_string(kind)},
      {"out_dir", out_dir.string()},
      {"master_seed", master_seed},
      {"detector", nmslab::to_json(detector)},
      {"clock", nmslab::to_json(clock)},
      {"params", params},
  };
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, ptr);
}

namespace {

// ---------------------------------------------------------------------------
// Run-directory plumbing

class RunDir {
 public:
  explicit RunDir(const std::filesystem::path& dir) : dir_(dir) {
    std::filesystem::create_directories(dir_);
    std::filesystem::remove(dir_ / "FAILED");
  }

  const std::filesystem::path& path() const { return dir_; }

  void write_text(const std::string& name, const std::string& text) const {
    std::ofstream f(dir_ / name, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + (dir_ / name).string());
    f << text;
  }

  void write_json(const std::string& name, const json& j) const {
    write_text(name, j.dump(2) + "\n");
  }

  std::ofstream open_csv(const std::string& name, const std::string& header) const {
    std::ofstream f(dir_ / name, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + (dir_ / name).string());
    f << header << "\n";
    return f;
  }

 private:
  std::filesystem::path dir_;
};

struct Row {
  std::string text;
  Row& add(const std::string& v) {
    if (!text.empty()) text += ",";
    text += v;
    return *this;
  }
  Row& add(double v) { return add(format_double(v)); }
  Row& add(uint64_t v) { return add(std::to_string(v)); }
  Row& add(int v) { return add(std::to_string(v)); }
  Row& add(bool v) { return add(std::string(v ? "1" : "0")); }
};

// ---------------------------------------------------------------------------
// Scene batches

struct SceneBatch {
  std::vector<Raster> rasters;
  std::vector<size_t> planted_boxes;
  std::vector<double> confidences;
};

SceneBatch build_single_object_scenes(const SyntheticDetector& detector, size_t count,
                                      size_t raster_dim, size_t boxes_min, size_t boxes_max,
                                      double conf_min, double conf_max, uint64_t seed) {
  SceneBatch batch;
  Rng rng(seed);
  for (size_t i = 0; i < count; ++i) {
    const size_t n_boxes = static_cast<size_t>(
        rng.uniform_int(static_cast<int64_t>(boxes_min), static_cast<int64_t>(boxes_max)));
    const double confidence = rng.uniform(conf_min, conf_max);
    SingleObjectScene scene =
        make_single_object_scene(detector, raster_dim, raster_dim, n_boxes, confidence);
    batch.rasters.push_back(std::move(scene.raster));
    batch.planted_boxes.push_back(n_boxes);
    batch.confidences.push_back(confidence);
  }
  return batch;
}

// Sets the clock's noise to a fraction of the mean zero-noise suppression
// time over the supplied scenes at k = 1; the paper-style convention for
// "noise at x% of the signal".
ClockSpec clock_with_fraction_noise(const ClockSpec& base, const SyntheticDetector& detector,
                                    std::span<const Raster> scenes, double fraction) {
  ClockSpec quiet = base;
  quiet.noise = NoiseSpec::none();
  quiet.repeats = 1;
  MeasurementClock clock(quiet);
  std::vector<double> times;
  times.reserve(scenes.size());
  for (const Raster& scene : scenes) {
    times.push_back(detector.detect(scene, clock).timing.nms_time);
  }
  ClockSpec noisy = base;
  noisy.noise = NoiseSpec::gaussian(fraction * mean(times));
  return noisy;
}

NeuralRuntimeModel calibrate_local(const SyntheticDetector& detector, MeasurementClock& clock,
                                   std::span<const std::pair<size_t, size_t>> sizes) {
  const BlackImageProbe probe = [&](size_t h, size_t w) {
    const Raster black(h, w, 0.0f);
    return timed_detect(detector, black, clock).timing.total_time;
  };
  return calibrate_neural_model(probe, sizes);
}

// ---------------------------------------------------------------------------
// profile: runtime vs object count

json run_profile(const RunConfig& cfg, const RunDir& dir) {
  const SyntheticDetector detector(cfg.detector);
  const size_t scene_count = cfg.params.value("scenes", 120);
  const size_t max_objects = cfg.params.value("max_objects", 9);
  const size_t raster_dim = cfg.params.value("raster_dim", 416);
  const size_t boxes_min = cfg.params.value("boxes_min", 1);
  const size_t boxes_max = cfg.params.value("boxes_max", 4);

  // Objects go on a coarse placement grid spaced at least one box size
  // apart, so the kept count equals the object count.
  const double spacing =
      std::max<double>(cfg.detector.grid.box_size,
                       static_cast<double>(2 * cfg.detector.grid.window)) +
      static_cast<double>(cfg.detector.grid.stride);
  const double margin = static_cast<double>(cfg.detector.grid.window);
  const double usable = static_cast<double>(raster_dim) - 2.0 * margin;
  const size_t cells_per_axis = static_cast<size_t>(usable / spacing);
  if (cells_per_axis * cells_per_axis < max_objects) {
    throw std::invalid_argument("profile: raster_dim too small for max_objects at this spacing");
  }

  Rng rng(derive_seed(cfg.master_seed, "profile-scenes"));
  MeasurementClock clock(cfg.clock);
  const NeuralRuntimeModel model =
      calibrate_local(detector, clock, default_calibration_sizes());

  auto csv = dir.open_csv("profile.csv",
                          "scene_id,k,B,o,comparisons,neural_time,nms_time,total_time,"
                          "estimated_nms_time,objects");
  std::vector<double> object_counts, nms_times, totals;
  for (size_t s = 0; s < scene_count; ++s) {
    const size_t objects = static_cast<size_t>(rng.uniform_int(1, static_cast<int64_t>(max_objects)));
    std::vector<size_t> cells(cells_per_axis * cells_per_axis);
    std::iota(cells.begin(), cells.end(), size_t{0});
    // partial shuffle for object placement
    for (size_t i = 0; i < objects; ++i) {
      const size_t j = i + static_cast<size_t>(rng.uniform_int(
                               0, static_cast<int64_t>(cells.size() - i - 1)));
      std::swap(cells[i], cells[j]);
    }
    std::vector<ObjectRequest> requests;
    const double window = static_cast<double>(cfg.detector.grid.window);
    for (size_t i = 0; i < objects; ++i) {
      const size_t cy = cells[i] / cells_per_axis;
      const size_t cx = cells[i] % cells_per_axis;
      const double x0 = margin + static_cast<double>(cx) * spacing;
      const double y0 = margin + static_cast<double>(cy) * spacing;
      const size_t n_boxes = static_cast<size_t>(
          rng.uniform_int(static_cast<int64_t>(boxes_min), static_cast<int64_t>(boxes_max)));
      const double conf = rng.uniform(0.65, 0.95);
      requests.push_back(
          ObjectRequest{BoundingBox(x0, y0, x0 + 2.0 * window, y0 + 2.0 * window), n_boxes, conf});
    }
    const Raster scene = make_multi_object_scene(detector, raster_dim, raster_dim, requests);
    const DetectResult r = timed_detect(detector, scene, clock);
    const double estimated = estimate_nms_time(model, r.timing.total_time, scene.pixel_count());

    Row row;
    row.add(s).add(size_t{1}).add(r.timing.box_count).add(r.timing.object_count)
        .add(r.timing.comparison_count).add(r.timing.neural_time).add(r.timing.nms_time)
        .add(r.timing.total_time).add(estimated).add(objects);
    csv << row.text << "\n";

    object_counts.push_back(static_cast<double>(objects));
    nms_times.push_back(r.timing.nms_time);
    totals.push_back(r.timing.total_time);
  }

  json summary;
  summary["scenes"] = scene_count;
  summary["rho_objects_nms_time"] = spearman(object_counts, nms_times);
  summary["rho_objects_total_time"] = spearman(object_counts, totals);
  return summary;
}

// ---------------------------------------------------------------------------
// amplify-sweep: correlation vs amplification factor (local or remote)

json run_amplify_sweep(const RunConfig& cfg, const RunDir& dir) {
  const SyntheticDetector detector(cfg.detector);
  const size_t scene_count = cfg.params.value("scenes", 300);
  const size_t raster_dim = cfg.params.value("raster_dim", 160);
  const size_t boxes_min = cfg.params.value("boxes_min", 2);
  const size_t boxes_max = cfg.params.value("boxes_max", 25);
  const double conf_min = cfg.params.value("conf_min", 0.65);
  const double conf_max = cfg.params.value("conf_max", 0.95);
  const double noise_fraction = cfg.params.value("noise_fraction", 0.05);
  std::vector<size_t> ks = cfg.params.value("ks", std::vector<size_t>{1, 3, 7});

  const SceneBatch batch = build_single_object_scenes(
      detector, scene_count, raster_dim, boxes_min, boxes_max, conf_min, conf_max,
      derive_seed(cfg.master_seed, "sweep-scenes"));

  json summary;
  std::vector<LeakageRow> rows;
  std::vector<LeakageDetail> details;

  if (cfg.params.contains("endpoint")) {
    // Remote path: round trips against a running service; candidate counts
    // come from the locally forged scenes.
    const std::string host = cfg.params.at("endpoint").value("host", "127.0.0.1");
    const int port = cfg.params.at("endpoint").value("port", 8700);
    const int repeats = cfg.clock.repeats;

    ServiceClient client(host, port);
    client.timed_query(Raster(32, 32, 0.0f), 1);  // connection warm-up

    const BlackImageProbe probe = [&](size_t h, size_t w) {
      return client.timed_query(Raster(h, w, 0.0f), repeats).rtt_median;
    };
    const auto sizes = default_calibration_sizes();
    const NeuralRuntimeModel model = calibrate_neural_model(probe, sizes);

    std::vector<double> box_counts;
    for (const Raster& scene : batch.rasters) {
      box_counts.push_back(static_cast<double>(detector.score_anchors(scene).size()));
    }
    for (size_t k : ks) {
      std::vector<double> rtts, estimates;
      for (size_t i = 0; i < batch.rasters.size(); ++i) {
        const Raster amplified = amplify(batch.rasters[i], k);
        const double rtt = client.timed_query(amplified, repeats).rtt_median;
        const double est = estimate_nms_time(model, rtt, amplified.pixel_count());
        rtts.push_back(rtt);
        estimates.push_back(est);
        details.push_back(LeakageDetail{i, k, static_cast<uint64_t>(box_counts[i]), 0, 0, 0.0,
                                        0.0, rtt, est});
      }
      rows.push_back(LeakageRow{k, spearman(box_counts, rtts), spearman(box_counts, estimates)});
    }
    summary["mode"] = "remote";
    summary["calibration_r_squared"] = model.r_squared;
  } else {
    const ClockSpec noisy =
        noise_fraction > 0.0
            ? clock_with_fraction_noise(cfg.clock, detector, batch.rasters, noise_fraction)
            : cfg.clock;
    MeasurementClock clock(noisy);
    const auto sizes = default_calibration_sizes();
    const NeuralRuntimeModel model = calibrate_local(detector, clock, sizes);
    rows = leakage_report(detector, batch.rasters, ks, clock, model, &details);
    summary["mode"] = "local";
    summary["noise_sigma"] = noisy.noise.sigma;
    summary["calibration_r_squared"] = model.r_squared;
  }

  auto detail_csv = dir.open_csv("leakage.csv",
                                 "scene_id,k,B,o,comparisons,neural_time,nms_time,total_time,"
                                 "estimated_nms_time");
  for (const LeakageDetail& d : details) {
    Row row;
    row.add(d.scene_id).add(d.amplification_k).add(d.boxes).add(d.objects).add(d.comparisons)
        .add(d.neural_time).add(d.nms_time).add(d.total_time).add(d.estimated_nms_time);
    detail_csv << row.text << "\n";
  }

  auto rho_csv = dir.open_csv("correlations.csv", "k,rho_time,rho_estimated");
  json rho_rows = json::array();
  for (const LeakageRow& r : rows) {
    Row row;
    row.add(r.amplification_k).add(r.rho_time).add(r.rho_estimated);
    rho_csv << row.text << "\n";
    rho_rows.push_back(json{{"k", r.amplification_k},
                            {"rho_time", r.rho_time},
                            {"rho_estimated", r.rho_estimated}});
  }
  summary["correlations"] = rho_rows;
  return summary;
}

// ---------------------------------------------------------------------------
// calibrate: black-image schedule, slope/intercept recovery

json run_calibrate(const RunConfig& cfg, const RunDir& dir) {
  const SyntheticDetector detector(cfg.detector);
  MeasurementClock clock(cfg.clock);

  std::vector<std::pair<size_t, size_t>> sizes;
  if (cfg.params.contains("sizes")) {
    for (const auto& hw : cfg.params.at("sizes")) {
      sizes.emplace_back(hw.at(0).get<size_t>(), hw.at(1).get<size_t>());
    }
  } else {
    sizes = default_calibration_sizes();
  }

  NeuralRuntimeModel model;
  if (cfg.params.contains("endpoint")) {
    const std::string host = cfg.params.at("endpoint").value("host", "127.0.0.1");
    const int port = cfg.params.at("endpoint").value("port", 8700);
    const int repeats = cfg.clock.repeats;
    ServiceClient client(host, port);
    client.timed_query(Raster(32, 32, 0.0f), 1);  // connection warm-up
    model = calibrate_neural_model(
        [&](size_t h, size_t w) {
          return client.timed_query(Raster(h, w, 0.0f), repeats).rtt_median;
        },
        sizes);
  } else {
    model = calibrate_local(detector, clock, sizes);
  }

  auto csv = dir.open_csv("calibration.csv", "pixel_count,total_time,predicted");
  for (const auto& [pixels, total] : model.calibration_points) {
    Row row;
    row.add(pixels).add(total).add(model.predict(pixels));
    csv << row.text << "\n";
  }

  return json{
      {"slope_per_pixel", model.slope_per_pixel},
      {"intercept", model.intercept},
      {"r_squared", model.r_squared},
      {"points", model.calibration_points.size()},
  };
}

// ---------------------------------------------------------------------------
// evade / evade-baseline / lambda-sweep

EvasionConfig evasion_config_from_params(const json& params, uint64_t seed) {
  EvasionConfig ec;
  ec.population_size = params.value("population", ec.population_size);
  ec.radius = params.value("radius", ec.radius);
  ec.lambda = params.value("lambda", ec.lambda);
  ec.amplification_k = params.value("amplification_k", ec.amplification_k);
  ec.amplify_resize_back = params.value("resize_back", ec.amplify_resize_back);
  ec.amplify_degradation = params.value("degradation", ec.amplify_degradation);
  // Experiment runs get a budget above the library default so the baseline
  // has room to converge on easy gadgets.
  ec.max_iterations = params.value("max_iterations", size_t{800});
  ec.max_queries = params.value("max_queries", ec.max_queries);
  ec.clip_to_valid = params.value("clip_to_valid", ec.clip_to_valid);
  ec.success_check_amplified = params.value("success_check_amplified", ec.success_check_amplified);
  ec.rng_seed = seed;
  return ec;
}

struct GadgetRun {
  size_t gadget_id = 0;
  double confidence = 0.0;
  size_t planted_boxes = 0;
  bool succeeded = false;
  size_t iterations = 0;
  uint64_t queries = 0;
  double l2_byte = 0.0;
  double linf_byte = 0.0;
  double mse_byte = 0.0;
  double l2_unit = 0.0;
  size_t initial_amplified_objects = 0;
};

// Measurement noise for the evasion experiments scales with the amplified
// (undegraded) gadget's suppression time: amplification is what lifts the
// per-box signal above this floor.
ClockSpec evasion_clock(const RunConfig& cfg, const SyntheticDetector& detector,
                        const Raster& gadget, size_t amplification_k, double noise_fraction,
                        size_t gadget_id) {
  ClockSpec clock = cfg.clock;
  clock.rng_seed = derive_seed(cfg.master_seed, "evade-clock", gadget_id);
  if (noise_fraction > 0.0) {
    MeasurementClock quiet(ClockSpec{ClockMode::modeled, NoiseSpec::none(), 1, 0});
    const double amp_nms =
        detector.detect(amplify(gadget, amplification_k), quiet).timing.nms_time;
    clock.noise = NoiseSpec::gaussian(noise_fraction * amp_nms);
  }
  return clock;
}

GadgetRun run_one_gadget(const SyntheticDetector& detector, const RunConfig& cfg,
                         const EvasionConfig& ec, double noise_fraction, size_t gadget_id,
                         size_t gadget_dim, size_t n_boxes, double confidence, bool baseline) {
  const SingleObjectScene gadget = make_gadget(detector, gadget_dim, n_boxes, confidence);

  const ClockSpec clock = evasion_clock(cfg, detector, gadget.raster, ec.amplification_k,
                                        noise_fraction, gadget_id);
  LocalQueryTarget target(detector, clock);

  // Objects the detector finds in the amplified starting image; the
  // degradation study groups runs by this count.
  MeasurementClock probe_clock(ClockSpec{ClockMode::modeled, NoiseSpec::none(), 1, 0});
  const Raster amp0 = amplify(gadget.raster, ec.amplification_k, ec.amplify_resize_back,
                              ec.amplify_degradation);
  const size_t initial_objects = detector.detect(amp0, probe_clock).detections.size();

  const AttackResult result = baseline ? run_decision_baseline(target, gadget.raster, ec)
                                       : run_timing_attack(target, gadget.raster, ec);

  GadgetRun row;
  row.gadget_id = gadget_id;
  row.confidence = confidence;
  row.planted_boxes = n_boxes;
  row.succeeded = result.trace.succeeded;
  row.iterations = result.trace.iteration_count;
  row.queries = result.trace.query_count;
  row.l2_byte = result.trace.final_byte.l2;
  row.linf_byte = result.trace.final_byte.l_inf;
  row.mse_byte = result.trace.final_byte.mse;
  row.l2_unit = result.trace.final_unit.l2;
  row.initial_amplified_objects = initial_objects;
  return row;
}

void write_gadget_rows(const RunDir& dir, const std::string& name,
                       std::span<const GadgetRun> rows) {
  auto csv = dir.open_csv(
      name,
      "gadget_id,confidence,planted_boxes,succeeded,iterations,queries,l2_byte,linf_byte,"
      "mse_byte,l2_unit,initial_amplified_objects");
  for (const GadgetRun& g : rows) {
    Row row;
    row.add(g.gadget_id).add(g.confidence).add(g.planted_boxes).add(g.succeeded)
        .add(g.iterations).add(g.queries).add(g.l2_byte).add(g.linf_byte).add(g.mse_byte)
        .add(g.l2_unit).add(g.initial_amplified_objects);
    csv << row.text << "\n";
  }
}

json run_evade(const RunConfig& cfg, const RunDir& dir, bool baseline) {
  const SyntheticDetector detector(cfg.detector);
  const size_t gadget_count = cfg.params.value("gadgets", 30);
  const size_t gadget_dim = cfg.params.value("gadget_dim", 32);
  const size_t n_boxes = cfg.params.value("n_boxes", 6);
  const double conf_min = cfg.params.value("conf_min", 0.65);
  const double conf_max = cfg.params.value("conf_max", 0.95);
  const double noise_fraction = cfg.params.value("noise_fraction", 0.2);
  const bool emit_trace = cfg.params.value("emit_trace", gadget_count == 1);

  Rng scene_rng(derive_seed(cfg.master_seed, "evade-scenes"));
  std::vector<GadgetRun> rows;
  std::vector<double> budgets;
  size_t successes = 0;

  std::ofstream trace_csv;
  if (emit_trace) {
    trace_csv = dir.open_csv("trace.csv",
                             "gadget_id,query_index,iteration,role,member_index,seconds,detected");
  }

  for (size_t g = 0; g < gadget_count; ++g) {
    const double confidence = scene_rng.uniform(conf_min, conf_max);
    EvasionConfig ec =
        evasion_config_from_params(cfg.params, derive_seed(cfg.master_seed, "evade-seed", g));

    if (emit_trace) {
      const SingleObjectScene gadget = make_gadget(detector, gadget_dim, n_boxes, confidence);
      const ClockSpec clock = evasion_clock(cfg, detector, gadget.raster, ec.amplification_k,
                                            noise_fraction, g);
      LocalQueryTarget target(detector, clock);
      const AttackResult result = baseline ? run_decision_baseline(target, gadget.raster, ec)
                                           : run_timing_attack(target, gadget.raster, ec);

      // Keep the images of traced runs for replay and inspection: exact
      // float tensors plus viewable PNGs.
      const std::string tag = "gadget" + std::to_string(g);
      write_file(dir.path() / (tag + "_start.rft"), encode_rft(gadget.raster));
      write_file(dir.path() / (tag + "_final.rft"), encode_rft(result.gadget));
      write_file(dir.path() / (tag + "_start.png"), encode_png(gadget.raster));
      write_file(dir.path() / (tag + "_final.png"), encode_png(result.gadget));

      MeasurementClock probe_clock(ClockSpec{ClockMode::modeled, NoiseSpec::none(), 1, 0});
      const Raster amp0 = amplify(gadget.raster, ec.amplification_k, ec.amplify_resize_back,
                                  ec.amplify_degradation);
      const size_t initial_objects = detector.detect(amp0, probe_clock).detections.size();

      for (const QueryRecord& q : result.trace.queries) {
        Row row;
        const char* role = q.role == QueryRole::detection_check
                               ? "check"
                               : (q.role == QueryRole::gadget_timing ? "gadget" : "member");
        row.add(g).add(q.query_index).add(q.iteration).add(std::string(role))
            .add(q.member_index).add(q.seconds).add(q.detected);
        trace_csv << row.text << "\n";
      }
      GadgetRun row;
      row.gadget_id = g;
      row.confidence = confidence;
      row.planted_boxes = n_boxes;
      row.succeeded = result.trace.succeeded;
      row.iterations = result.trace.iteration_count;
      row.queries = result.trace.query_count;
      row.l2_byte = result.trace.final_byte.l2;
      row.linf_byte = result.trace.final_byte.l_inf;
      row.mse_byte = result.trace.final_byte.mse;
      row.l2_unit = result.trace.final_unit.l2;
      row.initial_amplified_objects = initial_objects;
      rows.push_back(row);
    } else {
      rows.push_back(run_one_gadget(detector, cfg, ec, noise_fraction, g, gadget_dim, n_boxes,
                                    confidence, baseline));
    }
    if (rows.back().succeeded) ++successes;
    budgets.push_back(rows.back().l2_byte);
  }

  write_gadget_rows(dir, "gadgets.csv", rows);

  // Budget curve: the fraction of gadgets evaded within a given L2 budget.
  {
    std::vector<double> evaded;
    for (const GadgetRun& g : rows) {
      if (g.succeeded) evaded.push_back(g.l2_byte);
    }
    std::sort(evaded.begin(), evaded.end());
    auto csv = dir.open_csv("budget_curve.csv", "l2_budget_byte,fraction_evaded");
    for (size_t i = 0; i < evaded.size(); ++i) {
      Row row;
      row.add(evaded[i]).add(static_cast<double>(i + 1) / static_cast<double>(gadget_count));
      csv << row.text << "\n";
    }
  }

  json summary;
  summary["attack"] = baseline ? "decision-baseline" : "timing";
  summary["gadgets"] = gadget_count;
  summary["successes"] = successes;
  summary["median_l2_byte"] = median(budgets);
  return summary;
}

json run_lambda_sweep(const RunConfig& cfg, const RunDir& dir) {
  const SyntheticDetector detector(cfg.detector);
  const size_t gadget_count = cfg.params.value("gadgets", 30);
  const size_t gadget_dim = cfg.params.value("gadget_dim", 32);
  const size_t n_boxes = cfg.params.value("n_boxes", 6);
  const double conf_min = cfg.params.value("conf_min", 0.65);
  const double conf_max = cfg.params.value("conf_max", 0.95);
  const double noise_fraction = cfg.params.value("noise_fraction", 0.2);
  std::vector<double> lambdas = cfg.params.value("lambdas", std::vector<double>{0.25, 0.5, 1.0, 2.0});

  auto csv = dir.open_csv(
      "lambda_sweep.csv",
      "lambda,gadget_id,confidence,succeeded,iterations,queries,l2_byte,linf_byte,mse_byte");
  json per_lambda = json::array();

  for (double lambda : lambdas) {
    std::vector<double> budgets;
    size_t successes = 0;
    Rng scene_rng(derive_seed(cfg.master_seed, "evade-scenes"));  // same gadgets per lambda
    for (size_t g = 0; g < gadget_count; ++g) {
      const double confidence = scene_rng.uniform(conf_min, conf_max);
      EvasionConfig ec =
          evasion_config_from_params(cfg.params, derive_seed(cfg.master_seed, "evade-seed", g));
      ec.lambda = lambda;
      const GadgetRun row = run_one_gadget(detector, cfg, ec, noise_fraction, g, gadget_dim,
                                           n_boxes, confidence, /*baseline=*/false);
      Row out;
      out.add(lambda).add(row.gadget_id).add(row.confidence).add(row.succeeded)
          .add(row.iterations).add(row.queries).add(row.l2_byte).add(row.linf_byte)
          .add(row.mse_byte);
      csv << out.text << "\n";
      budgets.push_back(row.l2_byte);
      if (row.succeeded) ++successes;
    }
    per_lambda.push_back(json{{"lambda", lambda},
                              {"median_l2_byte", median(budgets)},
                              {"successes", successes}});
  }

  return json{{"per_lambda", per_lambda}};
}

// ---------------------------------------------------------------------------
// infer-dataset

json run_infer_dataset(const RunConfig& cfg, const RunDir& dir) {
  const SyntheticDetector detector(cfg.detector);
  const size_t reference_size = cfg.params.value("reference_size", 200);
  const size_t target_size = cfg.params.value("target_size", 100);
  const bool target_is_member = cfg.params.value("target_is_member", true);
  const size_t raster_dim = cfg.params.value("raster_dim", 160);
  const double crowd_prob_member = cfg.params.value("crowd_prob_member", 0.068);
  const double crowd_prob_nonmember = cfg.params.value("crowd_prob_nonmember", 0.029);
  const size_t base_boxes_min = cfg.params.value("base_boxes_min", 2);
  const size_t base_boxes_max = cfg.params.value("base_boxes_max", 8);
  const size_t crowd_bonus = cfg.params.value("crowd_bonus", 12);

  EndToEndOptions options;
  options.amplification_k = cfg.params.value("amplification_k", 5);
  options.tau = cfg.params.value("tau", 0.0);

  // The member/nonmember runtime gap is injected through the scene
  // distribution: members carry crowded scenes more often.
  auto build_set = [&](size_t count, double crowd_prob, const char* stream) {
    Rng rng(derive_seed(cfg.master_seed, stream));
    std::vector<Raster> images;
    images.reserve(count);
    for (size_t i = 0; i < count; ++i) {
      size_t n_boxes = static_cast<size_t>(rng.uniform_int(
          static_cast<int64_t>(base_boxes_min), static_cast<int64_t>(base_boxes_max)));
      if (rng.uniform01() < crowd_prob) n_boxes += crowd_bonus;
      const double conf = rng.uniform(0.7, 0.9);
      images.push_back(
          make_single_object_scene(detector, raster_dim, raster_dim, n_boxes, conf).raster);
    }
    return images;
  };

  const auto member_images = build_set(reference_size, crowd_prob_member, "infer-member");
  const auto nonmember_images = build_set(reference_size, crowd_prob_nonmember, "infer-nonmember");
  const auto target_images =
      build_set(target_size, target_is_member ? crowd_prob_member : crowd_prob_nonmember,
                "infer-target");

  MeasurementClock clock(cfg.clock);
  const NeuralRuntimeModel model =
      calibrate_local(detector, clock, default_calibration_sizes());
  const EndToEndResult result = end_to_end_inference(detector, clock, model, member_images,
                                                     nonmember_images, target_images, options);

  auto csv = dir.open_csv("samples.csv", "set,sample_id,estimated_nms_time,indicator");
  auto emit = [&](const char* name, std::span<const double> times) {
    for (size_t i = 0; i < times.size(); ++i) {
      Row row;
      row.add(std::string(name)).add(i).add(times[i]).add(times[i] >= result.tau);
      csv << row.text << "\n";
    }
  };
  emit("member", result.member_times);
  emit("nonmember", result.nonmember_times);
  emit("target", result.target_times);

  return json{
      {"decision", result.verdict.is_member ? "member" : "nonmember"},
      {"target_is_member", target_is_member},
      {"tau", result.tau},
      {"mu_hat_member", result.verdict.mu_hat_member},
      {"mu_hat_nonmember", result.verdict.mu_hat_nonmember},
      {"mu_hat_target", result.verdict.mu_hat_target},
      {"h", result.verdict.h},
      {"fp_bound", result.verdict.fp_bound},
      {"fp_bound_raw", result.verdict.fp_bound_raw},
  };
}

// ---------------------------------------------------------------------------
// fp-bound-curve

json run_fp_bound_curve(const RunConfig& cfg, const RunDir& dir) {
  const double mu_m = cfg.params.value("mu_member", 0.068);
  const double mu_nonm = cfg.params.value("mu_nonmember", 0.029);
  const size_t n_member = cfg.params.value("n_member", 2000);
  const size_t n_nonmember = cfg.params.value("n_nonmember", 2000);
  const size_t t_min = cfg.params.value("t_min", 50);
  const size_t t_max = cfg.params.value("t_max", 2000);
  const size_t t_step = cfg.params.value("t_step", 50);

  auto csv = dir.open_csv("fp_bound.csv", "target_size,fp_bound_raw,fp_bound,fn_bound_raw");
  double last = std::numeric_limits<double>::infinity();
  bool monotone = true;
  for (size_t t = t_min; t <= t_max; t += t_step) {
    const double raw = fp_rate_bound(n_member, n_nonmember, t, mu_m, mu_nonm);
    const double fn_raw = fn_rate_bound(n_member, n_nonmember, t, mu_m, mu_nonm);
    Row row;
    row.add(t).add(raw).add(std::min(raw, 1.0)).add(fn_raw);
    csv << row.text << "\n";
    if (raw > last) monotone = false;
    last = raw;
  }

  return json{{"monotone_decreasing", monotone},
              {"mu_member", mu_m},
              {"mu_nonmember", mu_nonm}};
}

// ---------------------------------------------------------------------------
// countermeasure-eval

json run_countermeasure_eval(const RunConfig& cfg, const RunDir& dir) {
  const size_t scene_count = cfg.params.value("scenes", 500);
  const size_t raster_dim = cfg.params.value("raster_dim", 160);
  const size_t boxes_min = cfg.params.value("boxes_min", 2);
  const size_t boxes_max = cfg.params.value("boxes_max", 25);
  const double noise_fraction = cfg.params.value("noise_fraction", 0.05);

  SyntheticDetectorConfig greedy_cfg = cfg.detector;
  greedy_cfg.nms_variant = NmsVariant::greedy;
  const SyntheticDetector greedy_detector(greedy_cfg);

  const SceneBatch batch = build_single_object_scenes(
      greedy_detector, scene_count, raster_dim, boxes_min, boxes_max, 0.65, 0.95,
      derive_seed(cfg.master_seed, "cm-scenes"));

  std::vector<double> box_counts;
  for (const Raster& scene : batch.rasters) {
    box_counts.push_back(static_cast<double>(greedy_detector.score_anchors(scene).size()));
  }

  // Shared noise scale, derived once from the greedy variant.
  const ClockSpec noisy = clock_with_fraction_noise(cfg.clock, greedy_detector, batch.rasters,
                                                    noise_fraction);

  // Mean suppression time of the greedy variant, for scaling the default
  // random delay.
  double greedy_mean = 0.0;
  {
    MeasurementClock quiet(ClockSpec{ClockMode::modeled, NoiseSpec::none(), 1, 0});
    std::vector<double> times;
    for (const Raster& scene : batch.rasters) {
      times.push_back(greedy_detector.detect(scene, quiet).timing.nms_time);
    }
    greedy_mean = mean(times);
  }

  auto eval_variant = [&](NmsVariant variant) {
    SyntheticDetectorConfig vc = cfg.detector;
    vc.nms_variant = variant;
    if (variant == NmsVariant::random_delay &&
        vc.delay_spec.family == NoiseSpec::Family::none) {
      // Delays on the order of the signal itself: enough to dampen the
      // correlation, not enough to remove it.
      vc.delay_spec = NoiseSpec::uniform(0.0, 1.5 * greedy_mean);
    }
    const SyntheticDetector detector(vc);
    MeasurementClock clock(noisy);
    MeasurementClock quiet(ClockSpec{ClockMode::modeled, NoiseSpec::none(), 1, 0});
    std::vector<double> times;
    bool all_match = true;
    for (const Raster& scene : batch.rasters) {
      times.push_back(detector.detect(scene, clock).timing.nms_time);
      const auto kept = detector.detect(scene, quiet).detections;
      const auto reference = greedy_detector.detect(scene, quiet).detections;
      if (kept.size() != reference.size()) {
        all_match = false;
        continue;
      }
      for (size_t i = 0; i < kept.size(); ++i) {
        if (kept[i].box.x_min != reference[i].box.x_min ||
            kept[i].box.y_min != reference[i].box.y_min ||
            kept[i].score != reference[i].score || kept[i].class_id != reference[i].class_id) {
          all_match = false;
          break;
        }
      }
    }
    return std::make_pair(spearman(box_counts, times), all_match);
  };

  auto csv = dir.open_csv("countermeasures.csv", "variant,rho_time,detections_match_greedy");
  json variants = json::array();
  for (NmsVariant variant :
       {NmsVariant::greedy, NmsVariant::constant_time, NmsVariant::random_delay}) {
    const auto [rho, match] = eval_variant(variant);
    Row row;
    row.add(to_string(variant)).add(rho).add(match);
    csv << row.text << "\n";
    variants.push_back(
        json{{"variant", to_string(variant)}, {"rho_time", rho}, {"detections_match", match}});
  }

  return json{{"variants", variants}, {"scenes", scene_count}};
}

// ---------------------------------------------------------------------------
// serve

json run_serve(const RunConfig& cfg, const RunDir& dir) {
  ServerOptions options;
  options.bind_address = cfg.params.value("bind_address", "127.0.0.1");
  options.port = cfg.params.value("port", 8700);
  // Environment overrides, for deployment glue.
  if (const char* env = std::getenv("NMSLAB_BIND"); env != nullptr && *env != '\0') {
    options.bind_address = env;
  }
  if (const char* env = std::getenv("NMSLAB_PORT"); env != nullptr && *env != '\0') {
    options.port = std::atoi(env);
  }
  options.serialize_requests = cfg.params.value("serialize_requests", true);
  options.sleep_modeled_time = cfg.params.value("sleep_modeled_time", true);
  if (cfg.params.contains("jitter")) {
    options.injected_jitter = noise_from_json(cfg.params.at("jitter"));
  }
  options.jitter_seed = derive_seed(cfg.master_seed, "serve-jitter");

  DetectionServer server(SyntheticDetector(cfg.detector), cfg.clock, options);
  const int port = server.start();
  dir.write_json("endpoint.json", json{{"host", options.bind_address}, {"port", port}});
  std::cout << "serving on " << options.bind_address << ":" << port << " (Ctrl-C to stop)\n";

  // Block until interrupted.
  static std::atomic<bool> stop_requested{false};
  std::signal(SIGINT, [](int) { stop_requested.store(true); });
  std::signal(SIGTERM, [](int) { stop_requested.store(true); });
  while (!stop_requested.load()) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  server.stop();
  return json{{"served_on", port}};
}

std::string render_report(const RunConfig& cfg, const json& summary) {
  std::ostringstream out;
  out << "experiment: " << to_string(cfg.kind) << "\n";
  out << "master_seed: " << cfg.master_seed << "\n";
  out << "summary:\n" << summary.dump(2) << "\n";
  return out.str();
}

}  // namespace

std::filesystem::path run(const RunConfig& config) {
  const RunDir dir(config.out_dir);
  dir.write_json("config.json", config.to_json());

  try {
    json summary;
    switch (config.kind) {
      case ExperimentKind::profile: summary = run_profile(config, dir); break;
      case ExperimentKind::amplify_sweep: summary = run_amplify_sweep(config, dir); break;
      case ExperimentKind::calibrate: summary = run_calibrate(config, dir); break;
      case ExperimentKind::evade: summary = run_evade(config, dir, false); break;
      case ExperimentKind::evade_baseline: summary = run_evade(config, dir, true); break;
      case ExperimentKind::lambda_sweep: summary = run_lambda_sweep(config, dir); break;
      case ExperimentKind::infer_dataset: summary = run_infer_dataset(config, dir); break;
      case ExperimentKind::fp_bound_curve: summary = run_fp_bound_curve(config, dir); break;
      case ExperimentKind::countermeasure_eval:
        summary = run_countermeasure_eval(config, dir);
        break;
      case ExperimentKind::serve: summary = run_serve(config, dir); break;
    }
    dir.write_json("summary.json", summary);
    dir.write_text("report.txt", render_report(config, summary));
  } catch (const std::exception& e) {
    dir.write_text("FAILED", std::string(e.what()) + "\n");
    throw;
  }
  return dir.path();
}

}  // namespace nmslab
