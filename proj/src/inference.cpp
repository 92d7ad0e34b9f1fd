#include "nmslab/inference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nmslab/rng.hpp"

namespace nmslab {

IndicatorSummary summarize(const RuntimeSampleSet& samples, double tau) {
  if (samples.samples.empty()) throw std::invalid_argument("summarize: empty sample set");
  if (!(tau > 0.0)) throw std::invalid_argument("summarize: tau must be positive");

  IndicatorSummary s;
  s.tau = tau;
  s.n = samples.samples.size();
  for (double runtime : samples.samples) {
    if (runtime >= tau) ++s.count;
  }
  s.mu_hat = static_cast<double>(s.count) / static_cast<double>(s.n);
  return s;
}

namespace {

InferenceVerdict decide_from_means(double mu_hat_m, double mu_hat_nonm, double mu_hat_target,
                                   size_t n_m, size_t n_nonm, size_t n_target) {
  InferenceVerdict v;
  v.mu_hat_member = mu_hat_m;
  v.mu_hat_nonmember = mu_hat_nonm;
  v.mu_hat_target = mu_hat_target;
  v.h = std::fabs(mu_hat_m - mu_hat_nonm) / 4.0;
  v.is_member = std::fabs(mu_hat_target - mu_hat_m) < std::fabs(mu_hat_target - mu_hat_nonm);

  if (mu_hat_m != mu_hat_nonm && mu_hat_m > 0.0 && mu_hat_nonm > 0.0) {
    // Plug-in bound using the empirical means as the population means. The
    // bound form requires delta <= 1; when the recipe leaves that range the
    // bound is simply not available and the vacuous value is reported.
    const double h = v.h;
    if (h / mu_hat_m <= 1.0 && h / mu_hat_nonm <= 1.0) {
      v.fp_bound_raw = fp_rate_bound(n_m, n_nonm, n_target, mu_hat_m, mu_hat_nonm);
    } else {
      v.fp_bound_raw = 6.0;  // three vacuous two-sided bounds
    }
  } else {
    v.fp_bound_raw = 6.0;  // three vacuous two-sided bounds
  }
  v.fp_bound = std::min(v.fp_bound_raw, 1.0);
  return v;
}

}  // namespace

InferenceVerdict decide(const IndicatorSummary& member, const IndicatorSummary& nonmember,
                        const IndicatorSummary& target) {
  if (member.tau != nonmember.tau || member.tau != target.tau) {
    throw std::invalid_argument("decide: summaries use different tau thresholds");
  }
  return decide_from_means(member.mu_hat, nonmember.mu_hat, target.mu_hat, member.n, nonmember.n,
                           target.n);
}

double chernoff_two_sided(double mu, double delta) {
  if (!(mu > 0.0)) throw std::invalid_argument("chernoff_two_sided: mu must be positive");
  if (!(delta >= 0.0 && delta <= 1.0)) {
    throw std::invalid_argument("chernoff_two_sided: delta must lie in [0,1]");
  }
  return 2.0 * std::exp(-mu * delta * delta / 3.0);
}

double fp_rate_bound(size_t n_member, size_t n_nonmember, size_t n_target, double mu_member,
                     double mu_nonmember) {
  if (n_member == 0 || n_nonmember == 0 || n_target == 0) {
    throw std::invalid_argument("fp_rate_bound: sample counts must be positive");
  }
  if (mu_member == mu_nonmember) {
    throw std::invalid_argument("fp_rate_bound: population means must differ");
  }
  if (!(mu_member > 0.0 && mu_nonmember > 0.0)) {
    throw std::invalid_argument("fp_rate_bound: population means must be positive");
  }
  const double h = std::fabs(mu_member - mu_nonmember) / 4.0;

  // Event (1): the member reference mean drifts beyond h.
  // Event (2): the nonmember reference mean drifts beyond h.
  // Event (3): the (truly nonmember) target mean drifts beyond h.
  // Each indicator-sum bound is instantiated with mu = n * population mean
  // and delta = h / population mean.
  const double b1 =
      chernoff_two_sided(static_cast<double>(n_member) * mu_member, h / mu_member);
  const double b2 =
      chernoff_two_sided(static_cast<double>(n_nonmember) * mu_nonmember, h / mu_nonmember);
  const double b3 =
      chernoff_two_sided(static_cast<double>(n_target) * mu_nonmember, h / mu_nonmember);
  return b1 + b2 + b3;
}

double fn_rate_bound(size_t n_member, size_t n_nonmember, size_t n_target, double mu_member,
                     double mu_nonmember) {
  return fp_rate_bound(n_nonmember, n_member, n_target, mu_nonmember, mu_member);
}

TheoremCheck validate_theorem_monte_carlo(double mu_member, double mu_nonmember, size_t n_member,
                                          size_t n_nonmember, size_t n_target, uint64_t trials,
                                          uint64_t rng_seed) {
  if (trials < 1000) {
    throw std::invalid_argument("validate_theorem_monte_carlo: need at least 1000 trials");
  }
  const double h = std::fabs(mu_member - mu_nonmember) / 4.0;
  // The closed-form bound only exists while every delta stays within [0,1];
  // outside that regime the comparison is against the vacuous three-term sum.
  double bound = 6.0;
  if (h / mu_member <= 1.0 && h / mu_nonmember <= 1.0) {
    bound = fp_rate_bound(n_member, n_nonmember, n_target, mu_member, mu_nonmember);
  }

  Rng rng(derive_seed(rng_seed, "theorem-mc"));
  auto bernoulli_mean = [&rng](double p, size_t n) {
    uint64_t count = 0;
    for (size_t i = 0; i < n; ++i) {
      if (rng.uniform01() < p) ++count;
    }
    return static_cast<double>(count) / static_cast<double>(n);
  };

  TheoremCheck check;
  check.trials = trials;
  check.bound = bound;
  uint64_t false_positives = 0;
  for (uint64_t t = 0; t < trials; ++t) {
    const double mu_hat_m = bernoulli_mean(mu_member, n_member);
    const double mu_hat_nonm = bernoulli_mean(mu_nonmember, n_nonmember);
    const double mu_hat_target = bernoulli_mean(mu_nonmember, n_target);  // truly nonmember

    const bool decided_member =
        std::fabs(mu_hat_target - mu_hat_m) < std::fabs(mu_hat_target - mu_hat_nonm);
    if (decided_member) ++false_positives;

    const bool within_h = std::fabs(mu_hat_m - mu_member) <= h &&
                          std::fabs(mu_hat_nonm - mu_nonmember) <= h &&
                          std::fabs(mu_hat_target - mu_nonmember) <= h;
    if (within_h) {
      ++check.event_trials;
      if (!(std::fabs(mu_hat_target - mu_hat_nonm) <= std::fabs(mu_hat_target - mu_hat_m))) {
        check.implication_held = false;
      }
    }
  }
  check.empirical_fp = static_cast<double>(false_positives) / static_cast<double>(trials);
  return check;
}

double pick_indicator_threshold(std::span<const double> member_times,
                                std::span<const double> nonmember_times) {
  if (member_times.empty() || nonmember_times.empty()) {
    throw std::invalid_argument("pick_indicator_threshold: empty inputs");
  }

  std::vector<double> all(member_times.begin(), member_times.end());
  all.insert(all.end(), nonmember_times.begin(), nonmember_times.end());
  std::sort(all.begin(), all.end());
  const double fallback = 0.5 * (mean(member_times) + mean(nonmember_times));
  if (all.front() >= all.back()) return fallback;

  // The indicator threshold sits in the notable drop between the bulk of
  // the runtimes and the slow cluster: the widest empty stretch whose right
  // side keeps between 1% and 40% of the samples.
  const size_t n = all.size();
  const size_t min_right = std::max<size_t>(1, n / 100);
  const size_t max_right = 2 * n / 5;
  double best_gap = -1.0;
  double tau = fallback;
  for (size_t i = 0; i + 1 < n; ++i) {
    const size_t right_count = n - (i + 1);
    if (right_count < min_right || right_count > max_right) continue;
    const double gap = all[i + 1] - all[i];
    if (gap > best_gap) {
      best_gap = gap;
      tau = all[i] + 0.5 * gap;
    }
  }
  if (best_gap <= 0.0) return fallback;
  return tau;
}

EndToEndResult end_to_end_inference(const SyntheticDetector& detector, MeasurementClock& clock,
                                    const NeuralRuntimeModel& model,
                                    std::span<const Raster> member_images,
                                    std::span<const Raster> nonmember_images,
                                    std::span<const Raster> target_images,
                                    const EndToEndOptions& options) {
  if (member_images.empty() || nonmember_images.empty() || target_images.empty()) {
    throw std::invalid_argument("end_to_end_inference: all three image sets must be non-empty");
  }

  auto measure_set = [&](std::span<const Raster> images) {
    std::vector<double> runtimes;
    runtimes.reserve(images.size());
    for (const Raster& img : images) {
      const Raster amplified = amplify(img, options.amplification_k);
      const DetectResult r = timed_detect(detector, amplified, clock);
      runtimes.push_back(estimate_nms_time(model, r.timing.total_time, amplified.pixel_count()));
    }
    return runtimes;
  };

  EndToEndResult result;
  result.member_times = measure_set(member_images);
  result.nonmember_times = measure_set(nonmember_images);
  result.target_times = measure_set(target_images);
  result.tau = options.tau > 0.0
                   ? options.tau
                   : pick_indicator_threshold(result.member_times, result.nonmember_times);

  const auto member_summary =
      summarize({SampleLabel::member, result.member_times, "member"}, result.tau);
  const auto nonmember_summary =
      summarize({SampleLabel::nonmember, result.nonmember_times, "nonmember"}, result.tau);
  const auto target_summary =
      summarize({SampleLabel::target, result.target_times, "target"}, result.tau);
  result.verdict = decide(member_summary, nonmember_summary, target_summary);
  return result;
}

}  // namespace nmslab
