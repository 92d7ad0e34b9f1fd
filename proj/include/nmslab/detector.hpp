#ifndef NMSLAB_DETECTOR_HPP
#define NMSLAB_DETECTOR_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "nmslab/clock.hpp"
#include "nmslab/geometry.hpp"
#include "nmslab/nms.hpp"
#include "nmslab/raster.hpp"

namespace nmslab {

// Anchor layout: one candidate per window position, windows stepping by
// `stride`. Candidate boxes are squares of side `box_size` centered on their
// window; they may extend beyond the raster (coordinates stay continuous).
struct AnchorGridConfig {
  size_t stride = 4;
  size_t window = 8;       // receptive field, multiple of stride
  double box_size = 48.0;  // large against the stride so one planted cluster
                           // suppresses to a single detection

  void validate() const;
};

enum class NmsVariant { greedy, constant_time, random_delay };

// A two-phase stand-in detector: a seeded linear scoring stage feeding the
// suppression stage. Per-anchor score = logistic(gain * (w . x) + bias),
// where w tiles one zero-sum stride-periodic pattern across the window.
// The periodicity is what makes k x k tiling of a scene multiply its
// above-threshold candidates by exactly k^2 (away from tile borders), and
// the zero sum makes every flat field score logistic(bias), so all-black
// calibration images produce no candidates.
struct SyntheticDetectorConfig {
  AnchorGridConfig grid;
  uint64_t weight_seed = 1;
  double gain = 140.0;             // logit units per unit of pattern-aligned mass
  double black_score = 1e-8;       // logistic(bias): flat-field score, far below threshold
  double detection_threshold = 0.6;
  double nms_threshold = 0.25;
  NmsCostModel nms_cost;
  double neural_cost_per_pixel = 2e-8;
  double neural_cost_fixed = 0.0;

  NmsVariant nms_variant = NmsVariant::greedy;
  size_t constant_time_capacity = 256;
  NoiseSpec delay_spec;  // random_delay variant

  void validate() const;
};

struct DetectResult {
  std::vector<Detection> detections;
  TimingObservation timing;
};

class SyntheticDetector {
 public:
  explicit SyntheticDetector(const SyntheticDetectorConfig& config);

  const SyntheticDetectorConfig& config() const { return config_; }
  double bias() const { return bias_; }

  // Top-left corners of every anchor window that fits the raster.
  std::vector<std::pair<size_t, size_t>> anchor_positions(size_t height, size_t width) const;

  double anchor_score(const Raster& img, size_t ax, size_t ay) const;

  // Scoring stage: candidates whose score reaches the detection threshold.
  std::vector<Detection> score_anchors(const Raster& img) const;

  // Forges an object: boosts at least n_boxes anchors whose windows lie
  // inside `region` to the target score by adding pattern-aligned mass,
  // leaving pixels outside the region untouched. Throws when the region
  // holds fewer than n_boxes anchors or clipping makes the target
  // unreachable.
  Raster plant_object(const Raster& img, const BoundingBox& region, double target_score,
                      size_t n_boxes) const;

  // Full pipeline: scoring, then the configured suppression variant, with
  // the timing observation filled according to the clock's mode.
  DetectResult detect(const Raster& img, MeasurementClock& clock) const;

  double modeled_neural_time(size_t pixel_count) const {
    return config_.neural_cost_fixed +
           config_.neural_cost_per_pixel * static_cast<double>(pixel_count);
  }

 private:
  double pattern_weight(size_t py, size_t px, size_t c) const {
    return pattern_[(py % config_.grid.stride) * config_.grid.stride * Raster::kChannels +
                    (px % config_.grid.stride) * Raster::kChannels + c];
  }

  NmsOutcome run_nms(NmsInput input, MeasurementClock& clock, double* extra_delay) const;

  SyntheticDetectorConfig config_;
  std::vector<double> pattern_;  // stride x stride x 3, zero-sum, window-tiled norm 1
  double bias_ = 0.0;
};

inline double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace nmslab

#endif  // NMSLAB_DETECTOR_HPP
