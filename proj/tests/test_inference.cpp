#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nmslab/inference.hpp"
#include "nmslab/scenes.hpp"

using namespace nmslab;

namespace {

IndicatorSummary summary_of(double tau, double mu_hat, size_t n) {
  IndicatorSummary s;
  s.tau = tau;
  s.mu_hat = mu_hat;
  s.n = n;
  s.count = static_cast<size_t>(std::lround(mu_hat * static_cast<double>(n)));
  return s;
}

}  // namespace

TEST_CASE("summarize counts the indicator directly") {
  const RuntimeSampleSet s{SampleLabel::member, {10.0, 80.0, 90.0}, ""};
  const IndicatorSummary sum = summarize(s, 75.0);
  CHECK(sum.mu_hat == doctest::Approx(2.0 / 3.0));
  CHECK(sum.count == 2);
  CHECK(sum.n == 3);

  const RuntimeSampleSet low{SampleLabel::member, {1.0, 2.0, 3.0}, ""};
  CHECK(summarize(low, 75.0).mu_hat == 0.0);

  CHECK_THROWS_AS(summarize(RuntimeSampleSet{SampleLabel::member, {}, ""}, 75.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(summarize(low, 0.0), std::invalid_argument);
}

TEST_CASE("summarize recovers a planted Bernoulli rate") {
  Rng rng(80001);
  RuntimeSampleSet s{SampleLabel::member, {}, ""};
  for (int i = 0; i < 2000; ++i) {
    s.samples.push_back(rng.uniform01() < 0.068 ? 100.0 : 10.0);
  }
  const IndicatorSummary sum = summarize(s, 75.0);
  // Three-sigma binomial band around 6.8%.
  CHECK(sum.mu_hat == doctest::Approx(0.068).epsilon(0.25));
}

TEST_CASE("nearest-mean decision with the documented tie rule") {
  const auto member = summary_of(75.0, 0.068, 2000);
  const auto nonmember = summary_of(75.0, 0.029, 2000);

  CHECK(decide(member, nonmember, summary_of(75.0, 0.060, 500)).is_member);
  CHECK_FALSE(decide(member, nonmember, summary_of(75.0, 0.030, 500)).is_member);
  // Exactly midway goes to nonmember.
  CHECK_FALSE(decide(member, nonmember, summary_of(75.0, 0.0485, 500)).is_member);

  const auto v = decide(member, nonmember, summary_of(75.0, 0.060, 500));
  CHECK(v.h == doctest::Approx((0.068 - 0.029) / 4.0));

  CHECK_THROWS_AS(decide(member, nonmember, summary_of(60.0, 0.06, 500)),
                  std::invalid_argument);
}

TEST_CASE("decision is invariant under a common rescaling that fixes tau's rank") {
  Rng rng(80002);
  for (int trial = 0; trial < 50; ++trial) {
    RuntimeSampleSet m{SampleLabel::member, {}, ""};
    RuntimeSampleSet nm{SampleLabel::nonmember, {}, ""};
    RuntimeSampleSet t{SampleLabel::target, {}, ""};
    for (int i = 0; i < 60; ++i) {
      m.samples.push_back(rng.uniform(0.0, 10.0));
      nm.samples.push_back(rng.uniform(0.0, 8.0));
      t.samples.push_back(rng.uniform(0.0, 9.0));
    }
    const double tau = 5.0;
    const bool base = decide(summarize(m, tau), summarize(nm, tau), summarize(t, tau)).is_member;

    auto scale = [](RuntimeSampleSet s) {
      for (double& v : s.samples) v = 3.0 * v + 1.0;
      return s;
    };
    const double tau2 = 3.0 * tau + 1.0;
    const bool scaled = decide(summarize(scale(m), tau2), summarize(scale(nm), tau2),
                               summarize(scale(t), tau2))
                            .is_member;
    CHECK(base == scaled);
  }
}

TEST_CASE("chernoff bound matches the closed form") {
  CHECK(chernoff_two_sided(100.0, 0.0) == 2.0);

  // Independent high-precision evaluation via expm1-free long double math.
  const long double mu = 136.0L;
  const long double delta = 0.00975L / 0.068L;
  const long double expected = 2.0L * std::exp(static_cast<long double>(-mu * delta * delta / 3.0L));
  const double got = chernoff_two_sided(136.0, 0.00975 / 0.068);
  CHECK(std::fabs(got - static_cast<double>(expected)) / static_cast<double>(expected) < 1e-12);
  CHECK(got == doctest::Approx(0.7875).epsilon(1e-3));

  // Strictly decreasing in mu for fixed positive delta.
  double previous = 3.0;
  for (double mu_v : {10.0, 50.0, 136.0, 500.0, 2000.0}) {
    const double b = chernoff_two_sided(mu_v, 0.2);
    CHECK(b < previous);
    previous = b;
  }

  CHECK_THROWS_AS(chernoff_two_sided(100.0, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(chernoff_two_sided(100.0, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(chernoff_two_sided(0.0, 0.5), std::invalid_argument);
}

TEST_CASE("false-positive bound: shape, limit, and independent evaluation") {
  const double mu_m = 0.068, mu_nonm = 0.029;

  double previous = std::numeric_limits<double>::infinity();
  for (size_t t = 50; t <= 2000; t += 50) {
    const double b = fp_rate_bound(2000, 2000, t, mu_m, mu_nonm);
    CHECK(b < previous);
    previous = b;
  }

  // With a huge target set the third term vanishes.
  const double h = (mu_m - mu_nonm) / 4.0;
  const double two_terms = chernoff_two_sided(2000 * mu_m, h / mu_m) +
                           chernoff_two_sided(2000 * mu_nonm, h / mu_nonm);
  CHECK(fp_rate_bound(2000, 2000, 4000000, mu_m, mu_nonm) ==
        doctest::Approx(two_terms).epsilon(1e-9));

  // Re-derive the three-term sum from scratch.
  auto one_term = [](double n, double mu, double hh) {
    return 2.0 * std::exp(-(n * mu) * (hh / mu) * (hh / mu) / 3.0);
  };
  const double independent = one_term(2000, mu_m, h) + one_term(2000, mu_nonm, h) +
                             one_term(500, mu_nonm, h);
  CHECK(fp_rate_bound(2000, 2000, 500, mu_m, mu_nonm) ==
        doctest::Approx(independent).epsilon(1e-12));

  CHECK_THROWS_AS(fp_rate_bound(2000, 2000, 500, 0.05, 0.05), std::invalid_argument);
  CHECK_THROWS_AS(fp_rate_bound(0, 2000, 500, mu_m, mu_nonm), std::invalid_argument);
}

TEST_CASE("false-negative bound is the role-swapped false-positive bound") {
  const double fn = fn_rate_bound(2000, 1500, 700, 0.068, 0.029);
  const double swapped = fp_rate_bound(1500, 2000, 700, 0.029, 0.068);
  CHECK(fn == swapped);
}

TEST_CASE("monte carlo stays below the analytic bound and the theorem holds") {
  const auto check = validate_theorem_monte_carlo(0.068, 0.029, 2000, 2000, 500, 10000, 4242);
  CHECK(check.empirical_fp <= check.bound);
  CHECK(check.implication_held);
  CHECK(check.event_trials > 0);
}

TEST_CASE("monte carlo separated point masses never false-positive") {
  const auto check = validate_theorem_monte_carlo(0.9999, 0.0001, 400, 400, 200, 2000, 7);
  CHECK(check.empirical_fp == 0.0);
  CHECK(check.implication_held);
}

TEST_CASE("indicator threshold lands in the gap between clusters") {
  Rng rng(80003);
  std::vector<double> member_times, nonmember_times;
  for (int i = 0; i < 300; ++i) {
    member_times.push_back(rng.uniform01() < 0.068 ? rng.uniform(95.0, 110.0)
                                                   : rng.uniform(5.0, 40.0));
    nonmember_times.push_back(rng.uniform01() < 0.029 ? rng.uniform(95.0, 110.0)
                                                      : rng.uniform(5.0, 40.0));
  }
  const double tau = pick_indicator_threshold(member_times, nonmember_times);
  CHECK(tau > 40.0);
  CHECK(tau < 95.0);
}

TEST_CASE("end-to-end inference separates member and nonmember targets") {
  SyntheticDetectorConfig config;
  config.weight_seed = 7;
  config.neural_cost_fixed = 0.0;
  const SyntheticDetector detector(config);

  auto build = [&](size_t count, double crowd_prob, uint64_t seed) {
    Rng rng(seed);
    std::vector<Raster> images;
    for (size_t i = 0; i < count; ++i) {
      size_t n_boxes = static_cast<size_t>(rng.uniform_int(2, 8));
      if (rng.uniform01() < crowd_prob) n_boxes += 12;
      images.push_back(
          make_single_object_scene(detector, 160, 160, n_boxes, rng.uniform(0.7, 0.9)).raster);
    }
    return images;
  };
  // Small reference sets keep the test quick; the crowd probabilities are
  // exaggerated accordingly.
  const auto members = build(60, 0.25, 1);
  const auto nonmembers = build(60, 0.05, 2);
  const auto target_member = build(40, 0.25, 3);
  const auto target_nonmember = build(40, 0.05, 4);

  MeasurementClock clock(ClockSpec{ClockMode::modeled, NoiseSpec::none(), 1, 11});
  const auto model = calibrate_neural_model(
      [&](size_t h, size_t w) {
        const Raster black(h, w, 0.0f);
        return timed_detect(detector, black, clock).timing.total_time;
      },
      default_calibration_sizes());

  EndToEndOptions options;  // auto tau, k = 5
  const auto as_member =
      end_to_end_inference(detector, clock, model, members, nonmembers, target_member, options);
  CHECK(as_member.verdict.is_member);
  CHECK(as_member.verdict.mu_hat_member > as_member.verdict.mu_hat_nonmember);

  const auto as_nonmember = end_to_end_inference(detector, clock, model, members, nonmembers,
                                                 target_nonmember, options);
  CHECK_FALSE(as_nonmember.verdict.is_member);

  // A tau beyond every runtime zeroes all indicators; the tie rule says
  // nonmember.
  EndToEndOptions huge_tau = options;
  huge_tau.tau = 1e9;
  const auto degenerate = end_to_end_inference(detector, clock, model, members, nonmembers,
                                               target_member, huge_tau);
  CHECK_FALSE(degenerate.verdict.is_member);
  CHECK(degenerate.verdict.mu_hat_target == 0.0);
}
