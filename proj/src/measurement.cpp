#include "nmslab/measurement.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace nmslab {

std::vector<std::pair<size_t, size_t>> default_calibration_sizes() {
  std::vector<std::pair<size_t, size_t>> sizes;
  sizes.reserve(80);
  for (size_t k = 0; k <= 39; ++k) {
    sizes.emplace_back(416, 416 + 32 * k);
    sizes.emplace_back(416 + 32 * k, 416);
  }
  return sizes;
}

NeuralRuntimeModel calibrate_neural_model(const BlackImageProbe& probe,
                                          std::span<const std::pair<size_t, size_t>> sizes) {
  if (sizes.size() < 3) {
    throw std::invalid_argument("calibrate_neural_model: need at least three probe sizes");
  }
  std::set<uint64_t> distinct;
  for (const auto& [h, w] : sizes) distinct.insert(static_cast<uint64_t>(h) * w);
  if (distinct.size() < 2) {
    throw std::invalid_argument("calibrate_neural_model: probe sizes are all equal");
  }

  NeuralRuntimeModel model;
  std::vector<double> xs, ys;
  xs.reserve(sizes.size());
  ys.reserve(sizes.size());
  for (const auto& [h, w] : sizes) {
    const uint64_t pixels = static_cast<uint64_t>(h) * w;
    const double total = probe(h, w);
    model.calibration_points.emplace_back(pixels, total);
    xs.push_back(static_cast<double>(pixels));
    ys.push_back(total);
  }

  const LinearFit fit = ols_fit(xs, ys);
  model.slope_per_pixel = fit.slope;
  model.intercept = fit.intercept;
  model.r_squared = fit.r_squared;

  if (xs.size() > 2) {
    const double mx = mean(xs);
    double ss_res = 0.0, sxx = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
      const double resid = ys[i] - model.predict(static_cast<uint64_t>(xs[i]));
      ss_res += resid * resid;
      sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    model.slope_standard_error =
        std::sqrt(ss_res / static_cast<double>(xs.size() - 2) / sxx);
  }
  return model;
}

DetectResult timed_detect(const SyntheticDetector& detector, const Raster& img,
                          MeasurementClock& clock) {
  const int repeats = clock.repeats();
  DetectResult last = detector.detect(img, clock);
  if (repeats == 1) return last;

  std::vector<double> neural{last.timing.neural_time};
  std::vector<double> nms{last.timing.nms_time};
  std::vector<double> total{last.timing.total_time};
  for (int i = 1; i < repeats; ++i) {
    last = detector.detect(img, clock);
    neural.push_back(last.timing.neural_time);
    nms.push_back(last.timing.nms_time);
    total.push_back(last.timing.total_time);
  }
  last.timing.neural_time = median(neural);
  last.timing.nms_time = median(nms);
  last.timing.total_time = median(total);
  return last;
}

std::vector<LeakageRow> leakage_report(const SyntheticDetector& detector,
                                       std::span<const Raster> scenes,
                                       std::span<const size_t> amplification_ks,
                                       MeasurementClock& clock,
                                       const NeuralRuntimeModel& model,
                                       std::vector<LeakageDetail>* details) {
  if (scenes.empty()) throw std::invalid_argument("leakage_report: no scenes");

  // Ground-truth candidate counts from the unamplified scenes.
  std::vector<double> box_counts;
  box_counts.reserve(scenes.size());
  for (const Raster& scene : scenes) {
    box_counts.push_back(static_cast<double>(detector.score_anchors(scene).size()));
  }

  std::vector<LeakageRow> rows;
  for (size_t k : amplification_ks) {
    std::vector<double> times, estimates;
    times.reserve(scenes.size());
    estimates.reserve(scenes.size());
    for (size_t i = 0; i < scenes.size(); ++i) {
      const Raster amplified = amplify(scenes[i], k);
      const DetectResult r = timed_detect(detector, amplified, clock);
      const double estimated =
          estimate_nms_time(model, r.timing.total_time, amplified.pixel_count());
      times.push_back(r.timing.nms_time);
      estimates.push_back(estimated);
      if (details != nullptr) {
        details->push_back(LeakageDetail{i, k, static_cast<uint64_t>(box_counts[i]),
                                         r.timing.object_count, r.timing.comparison_count,
                                         r.timing.neural_time, r.timing.nms_time,
                                         r.timing.total_time, estimated});
      }
    }
    LeakageRow row;
    row.amplification_k = k;
    row.rho_time = spearman(box_counts, times);
    row.rho_estimated = spearman(box_counts, estimates);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace nmslab
