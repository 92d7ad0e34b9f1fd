#ifndef NMSLAB_NMS_HPP
#define NMSLAB_NMS_HPP

#include <cstdint>
#include <vector>

#include "nmslab/geometry.hpp"
#include "nmslab/noise.hpp"

namespace nmslab {

struct NmsInput {
  std::vector<Detection> detections;
  double nms_threshold = 0.5;  // strictly in (0,1)
};

// Survivors plus the instrumentation that makes the suppression loop's cost
// observable: every IoU evaluation is counted, including the dummy
// comparisons of the padded variant.
struct NmsOutcome {
  std::vector<Detection> kept;
  uint64_t comparison_count = 0;
  uint64_t outer_iterations = 0;
  bool padded = false;
};

// Converts the counters into modeled wall time.
struct NmsCostModel {
  double cost_per_comparison = 1e-6;
  double cost_per_iteration = 5e-6;
  double fixed_cost = 5e-6;
};

// Greedy suppression: repeatedly keep the max-score candidate (ties broken
// by lowest input index) and drop every remaining candidate whose IoU with
// it reaches the threshold. comparison_count accumulates the remaining-set
// size of each outer iteration.
NmsOutcome greedy_nms(const NmsInput& input);

// Fixed-schedule variant: the input is padded to `capacity` slots with
// sentinel boxes, and every slot pair is IoU-evaluated exactly once with
// masked suppression updates and no data-dependent early exit. The kept set
// equals greedy_nms(input).kept; comparison_count is capacity*(capacity-1)/2
// regardless of the input, and outer_iterations is capacity.
// Throws std::invalid_argument when the input exceeds the capacity.
NmsOutcome constant_time_nms(const NmsInput& input, size_t capacity);

struct RandomDelayResult {
  NmsOutcome outcome;
  double extra_delay = 0.0;  // seconds
};

// Greedy result plus an additive delay drawn from `delay`; reproducible
// under the seed. The delay distribution must have a finite mean.
RandomDelayResult random_delay_nms(const NmsInput& input, const NoiseSpec& delay,
                                   uint64_t rng_seed);

inline double modeled_nms_time(const NmsOutcome& outcome, const NmsCostModel& model) {
  return model.fixed_cost +
         static_cast<double>(outcome.outer_iterations) * model.cost_per_iteration +
         static_cast<double>(outcome.comparison_count) * model.cost_per_comparison;
}

}  // namespace nmslab

#endif  // NMSLAB_NMS_HPP
