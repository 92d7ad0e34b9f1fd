#ifndef NMSLAB_EVASION_HPP
#define NMSLAB_EVASION_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "nmslab/query.hpp"
#include "nmslab/raster.hpp"

namespace nmslab {

// Attack state lives on the 0-255 scale: radius and lambda are byte-scale
// quantities, and each breeding step moves the gadget by exactly lambda in
// byte L2. Rasters are converted at the query boundary.
struct EvasionConfig {
  size_t population_size = 20;
  double radius = 25.0;
  double lambda = 0.5;
  size_t amplification_k = 3;
  bool amplify_resize_back = false;
  double amplify_degradation = 1.0;
  size_t max_iterations = 500;
  uint64_t max_queries = 0;  // 0: no cap; otherwise both attacks stop when an
                             // iteration no longer fits the budget
  uint64_t rng_seed = 0;
  bool clip_to_valid = true;
  // The printed loop checks detection on the unamplified gadget while every
  // timing query is amplified; set this to check the amplified image instead.
  bool success_check_amplified = false;

  void validate() const;
};

struct FitnessResult {
  std::vector<double> fitness;   // |dt_j| / sum |dt|, all-zero when degenerate
  std::vector<int> direction;    // sign(gadget_time - member_time)
  bool degenerate = false;       // every member time equals the gadget time
};

FitnessResult fitness_and_direction(double gadget_time, std::span<const double> member_times);

// Weighted perturbation sum, Frobenius-normalized, scaled by lambda, added
// to the gadget. Returns the gadget unchanged when every fitness*direction
// term is zero or the weighted sum cancels exactly.
std::vector<double> breed(std::span<const double> gadget,
                          const std::vector<std::vector<double>>& perturbations,
                          std::span<const double> fitness, std::span<const int> direction,
                          double lambda, bool clip_to_valid, double clip_lo, double clip_hi);

enum class QueryRole { detection_check, gadget_timing, member_timing };

struct QueryRecord {
  uint64_t query_index = 0;
  size_t iteration = 0;
  QueryRole role = QueryRole::detection_check;
  int member_index = -1;
  double seconds = 0.0;
  bool detected = false;
};

struct IterationRecord {
  size_t iteration = 0;
  double gadget_time = 0.0;
  std::vector<double> member_times;
  std::vector<double> fitness;
  std::vector<int> direction;
  double mutation_norm = 0.0;  // pre-normalization Frobenius norm
  size_t redraws = 0;
};

enum class MetricScale { unit, byte };

struct PerturbationReport {
  double l2 = 0.0;
  double l_inf = 0.0;
  double mse = 0.0;
  MetricScale scale = MetricScale::unit;
};

PerturbationReport perturbation_metrics(const Raster& original, const Raster& adversarial,
                                        MetricScale scale);

struct EvasionTrace {
  std::vector<QueryRecord> queries;
  std::vector<IterationRecord> iterations;
  uint64_t query_count = 0;
  size_t iteration_count = 0;
  size_t redraw_count = 0;
  bool succeeded = false;
  PerturbationReport final_unit;
  PerturbationReport final_byte;
};

struct AttackResult {
  Raster gadget;
  EvasionTrace trace;
};

// Timing-guided evolutionary evasion: per iteration, time the amplified
// gadget, time p amplified perturbed members, weight each member's
// perturbation by its absolute timing shift, and step toward the faster
// members. Stops when the gadget is no longer detected or the budget runs
// out (the trace's succeeded flag tells which).
AttackResult run_timing_attack(QueryTarget& target, const Raster& gadget0,
                               const EvasionConfig& cfg);

// Decision-only baseline: same loop, fitness +-1/p from each member's
// detection flag alone, no amplification.
AttackResult run_decision_baseline(QueryTarget& target, const Raster& gadget0,
                                   const EvasionConfig& cfg);

}  // namespace nmslab

#endif  // NMSLAB_EVASION_HPP
