#ifndef NMSLAB_MEASUREMENT_HPP
#define NMSLAB_MEASUREMENT_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "nmslab/clock.hpp"
#include "nmslab/detector.hpp"
#include "nmslab/stats.hpp"

namespace nmslab {

// Linear model of the scoring stage's runtime in the pixel count, fitted on
// objectless (all-black) images where the suppression stage contributes only
// its fixed cost. Subtracting its prediction from a total isolates the
// suppression time.
struct NeuralRuntimeModel {
  double slope_per_pixel = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double slope_standard_error = 0.0;
  std::vector<std::pair<uint64_t, double>> calibration_points;  // (pixels, total)

  double predict(uint64_t pixel_count) const {
    return intercept + slope_per_pixel * static_cast<double>(pixel_count);
  }
};

// Measured end-to-end time for a black probe image of the given size.
using BlackImageProbe = std::function<double(size_t height, size_t width)>;

// The probe schedule: 416x(416+32k) and (416+32k)x416 for k = 0..39.
std::vector<std::pair<size_t, size_t>> default_calibration_sizes();

// Least squares of total time on pixel count over the probe sizes.
// Requires at least three probes spanning at least two distinct pixel
// counts; throws otherwise.
NeuralRuntimeModel calibrate_neural_model(const BlackImageProbe& probe,
                                          std::span<const std::pair<size_t, size_t>> sizes);

// May be negative under noise; negative estimates are reported as-is since
// clamping would bias downstream statistics.
inline double estimate_nms_time(const NeuralRuntimeModel& model, double total_time,
                                uint64_t pixel_count) {
  return total_time - model.predict(pixel_count);
}

// Runs detect() clock.repeats() times and reports the per-field median.
// Detections and counters are identical across repeats; only noise redraws.
DetectResult timed_detect(const SyntheticDetector& detector, const Raster& img,
                          MeasurementClock& clock);

struct LeakageRow {
  size_t amplification_k = 1;
  double rho_time = 0.0;       // Spearman(box count, suppression time)
  double rho_estimated = 0.0;  // Spearman(box count, estimated suppression time)
};

struct LeakageDetail {
  size_t scene_id = 0;
  size_t amplification_k = 1;
  uint64_t boxes = 0;  // unamplified candidate count
  uint64_t objects = 0;
  uint64_t comparisons = 0;
  double neural_time = 0.0;
  double nms_time = 0.0;
  double total_time = 0.0;
  double estimated_nms_time = 0.0;
};

// Correlation table across amplification factors for a set of single-object
// scenes. Box counts are taken from the unamplified scenes; per-measurement
// rows land in `details` when given.
std::vector<LeakageRow> leakage_report(const SyntheticDetector& detector,
                                       std::span<const Raster> scenes,
                                       std::span<const size_t> amplification_ks,
                                       MeasurementClock& clock,
                                       const NeuralRuntimeModel& model,
                                       std::vector<LeakageDetail>* details = nullptr);

}  // namespace nmslab

#endif  // NMSLAB_MEASUREMENT_HPP
