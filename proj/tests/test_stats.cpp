#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "nmslab/rng.hpp"
#include "nmslab/stats.hpp"

using namespace nmslab;

namespace {

// No-ties oracle: 1 - 6 sum(d^2) / (n (n^2 - 1)).
double spearman_d2_oracle(std::span<const double> xs, std::span<const double> ys) {
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  double d2 = 0.0;
  for (size_t i = 0; i < rx.size(); ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
  const double n = static_cast<double>(rx.size());
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

}  // namespace

TEST_CASE("median is exact") {
  CHECK(median(std::vector<double>{3.0}) == 3.0);
  CHECK(median(std::vector<double>{5.0, 1.0, 3.0}) == 3.0);
  CHECK(median(std::vector<double>{4.0, 1.0, 3.0, 2.0}) == doctest::Approx(2.5));
  CHECK_THROWS_AS(median(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("spearman on pinned examples") {
  CHECK(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{10, 20, 30}) ==
        doctest::Approx(1.0));
  CHECK(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}) ==
        doctest::Approx(-1.0));
  // d^2 = 1+1+1+1 over n=4: rho = 0.6
  CHECK(spearman(std::vector<double>{1, 2, 3, 4}, std::vector<double>{2, 1, 4, 3}) ==
        doctest::Approx(0.6));
}

TEST_CASE("spearman input validation") {
  CHECK_THROWS_AS(spearman(std::vector<double>{1, 2}, std::vector<double>{1}),
                  std::invalid_argument);
  CHECK_THROWS_AS(spearman(std::vector<double>{1}, std::vector<double>{1}),
                  std::invalid_argument);
  CHECK_THROWS_AS(spearman(std::vector<double>{2, 2, 2}, std::vector<double>{1, 2, 3}),
                  std::invalid_argument);
}

TEST_CASE("spearman equals the d2 oracle without ties") {
  Rng rng(31001);
  for (int trial = 0; trial < 200; ++trial) {
    const size_t n = static_cast<size_t>(rng.uniform_int(2, 40));
    std::vector<double> xs(n), ys(n);
    for (size_t i = 0; i < n; ++i) {
      xs[i] = rng.uniform01();
      ys[i] = rng.uniform01();
    }
    CHECK(spearman(xs, ys) == doctest::Approx(spearman_d2_oracle(xs, ys)).epsilon(1e-12));
  }
}

TEST_CASE("spearman is invariant under strictly monotone transforms") {
  Rng rng(31002);
  std::vector<double> xs(50), ys(50);
  for (size_t i = 0; i < xs.size(); ++i) {
    xs[i] = rng.uniform(0.1, 10.0);
    ys[i] = rng.uniform(0.1, 10.0);
  }
  const double base = spearman(xs, ys);

  std::vector<double> xs_exp(xs.size()), ys_cub(ys.size());
  for (size_t i = 0; i < xs.size(); ++i) {
    xs_exp[i] = std::exp(xs[i]);
    ys_cub[i] = ys[i] * ys[i] * ys[i];
  }
  CHECK(spearman(xs_exp, ys) == doctest::Approx(base).epsilon(1e-12));
  CHECK(spearman(xs, ys_cub) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("ols recovers exact linear data") {
  std::vector<double> xs{1, 2, 3, 4, 5};
  std::vector<double> ys;
  for (double x : xs) ys.push_back(2.5 * x - 1.25);
  const LinearFit fit = ols_fit(xs, ys);
  CHECK(fit.slope == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(-1.25).epsilon(1e-12));
  CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ols rejects a constant design") {
  CHECK_THROWS_AS(ols_fit(std::vector<double>{2, 2, 2}, std::vector<double>{1, 2, 3}),
                  std::invalid_argument);
}

TEST_CASE("normal cdf at pinned points") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
  CHECK(normal_cdf(1.959963985) == doctest::Approx(0.975).epsilon(1e-6));
  CHECK(normal_cdf(-1.959963985) == doctest::Approx(0.025).epsilon(1e-6));
}

TEST_CASE("wilcoxon signed-rank detects a consistent shift") {
  Rng rng(31003);
  std::vector<double> xs(30), ys(30);
  for (size_t i = 0; i < xs.size(); ++i) {
    xs[i] = rng.uniform(0.0, 1.0);
    ys[i] = xs[i] + rng.uniform(0.2, 0.8);  // ys strictly larger
  }
  CHECK(wilcoxon_signed_rank_less(xs, ys) < 0.001);
  CHECK(wilcoxon_signed_rank_less(ys, xs) > 0.99);
  CHECK(wilcoxon_signed_rank_less(xs, xs) == 1.0);
}

TEST_CASE("wilcoxon p is near uniform under the null") {
  Rng rng(31004);
  int rejections = 0;
  const int trials = 300;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> xs(25), ys(25);
    for (size_t i = 0; i < xs.size(); ++i) {
      xs[i] = rng.gaussian();
      ys[i] = rng.gaussian();
    }
    if (wilcoxon_signed_rank_less(xs, ys) < 0.05) ++rejections;
  }
  // ~5% expected; generous band for a seeded run
  CHECK(rejections < trials / 8);
}
