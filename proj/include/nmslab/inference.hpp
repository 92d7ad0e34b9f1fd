#ifndef NMSLAB_INFERENCE_HPP
#define NMSLAB_INFERENCE_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nmslab/measurement.hpp"
#include "nmslab/raster.hpp"

namespace nmslab {

enum class SampleLabel { member, nonmember, target };

struct RuntimeSampleSet {
  SampleLabel label = SampleLabel::target;
  std::vector<double> samples;  // estimated suppression runtimes, seconds
  std::string source;
};

// Indicator statistics at threshold tau: mu_hat is the fraction of samples
// whose runtime reaches tau; count is the indicator sum.
struct IndicatorSummary {
  double tau = 0.0;
  double mu_hat = 0.0;
  size_t n = 0;
  size_t count = 0;
};

IndicatorSummary summarize(const RuntimeSampleSet& samples, double tau);

struct InferenceVerdict {
  bool is_member = false;  // nearest-mean rule; exact ties go to nonmember
  double mu_hat_member = 0.0;
  double mu_hat_nonmember = 0.0;
  double mu_hat_target = 0.0;
  double h = 0.0;          // |mu_hat_member - mu_hat_nonmember| / 4
  double fp_bound = 0.0;   // union bound, clamped to [0,1] for reporting
  double fp_bound_raw = 0.0;
};

// Nearest-mean decision over indicator means; all three summaries must use
// the same tau.
InferenceVerdict decide(const IndicatorSummary& member, const IndicatorSummary& nonmember,
                        const IndicatorSummary& target);

// Two-sided multiplicative Chernoff bound 2*exp(-mu*delta^2/3) for the sum
// of i.i.d. indicators with expectation mu. Stated only for 0 <= delta <= 1;
// anything outside that range is an error, not an extrapolation.
double chernoff_two_sided(double mu, double delta);

// Union bound over the three estimation events that can break the
// nearest-mean rule when the target set is drawn from the nonmember
// population, with h = |mu_m - mu_nonm|/4. Returns the raw three-term sum
// (it may exceed 1; clamp for display).
double fp_rate_bound(size_t n_member, size_t n_nonmember, size_t n_target, double mu_member,
                     double mu_nonmember);

// False-negative bound: the symmetric call with the population roles swapped.
double fn_rate_bound(size_t n_member, size_t n_nonmember, size_t n_target, double mu_member,
                     double mu_nonmember);

struct TheoremCheck {
  double empirical_fp = 0.0;
  double bound = 0.0;
  uint64_t trials = 0;
  uint64_t event_trials = 0;       // trials where all three events stayed within h
  bool implication_held = true;    // nearest-mean chose nonmember on all of those
};

// Simulates Bernoulli sample sets (target drawn from the nonmember
// population), applies the decision rule, and checks both the bound and the
// triangle-inequality implication trial by trial.
TheoremCheck validate_theorem_monte_carlo(double mu_member, double mu_nonmember, size_t n_member,
                                          size_t n_nonmember, size_t n_target, uint64_t trials,
                                          uint64_t rng_seed);

// Indicator threshold selection: the emptiest histogram bin between the two
// distributions' modes, the automated version of reading the valley off the
// runtime histograms. Falls back to the midpoint of the two means when the
// valley is degenerate.
double pick_indicator_threshold(std::span<const double> member_times,
                                std::span<const double> nonmember_times);

struct EndToEndOptions {
  double tau = 0.0;          // <= 0: pick automatically from the reference sets
  size_t amplification_k = 5;
};

struct EndToEndResult {
  InferenceVerdict verdict;
  double tau = 0.0;
  std::vector<double> member_times;
  std::vector<double> nonmember_times;
  std::vector<double> target_times;
};

// The full pipeline: amplify every image, query, estimate suppression
// runtimes through the calibrated model, summarize, decide.
EndToEndResult end_to_end_inference(const SyntheticDetector& detector, MeasurementClock& clock,
                                    const NeuralRuntimeModel& model,
                                    std::span<const Raster> member_images,
                                    std::span<const Raster> nonmember_images,
                                    std::span<const Raster> target_images,
                                    const EndToEndOptions& options);

}  // namespace nmslab

#endif  // NMSLAB_INFERENCE_HPP
