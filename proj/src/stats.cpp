#include "nmslab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace nmslab {

double mean(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean: empty input");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double median(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("median: empty input");
  std::vector<double> v(xs.begin(), xs.end());
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> average_ranks(std::span<const double> xs) {
  const size_t n = xs.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return xs[a] < xs[b]; });

  std::vector<double> ranks(n, 0.0);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double shared = 0.5 * static_cast<double>(i + j) + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
    i = j + 1;
  }
  return ranks;
}

namespace {

double pearson(std::span<const double> xs, std::span<const double> ys) {
  const size_t n = xs.size();
  const double mx = mean(xs);
  const double my = mean(ys);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw std::invalid_argument("correlation undefined for a constant input");
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("spearman: length mismatch");
  if (xs.size() < 2) throw std::invalid_argument("spearman: need at least two points");
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  return pearson(rx, ry);
}

LinearFit ols_fit(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("ols_fit: length mismatch");
  if (xs.size() < 2) throw std::invalid_argument("ols_fit: need at least two points");
  const size_t n = xs.size();
  const double mx = mean(xs);
  const double my = mean(ys);
  double sxy = 0.0, sxx = 0.0;
  for (size_t i = 0; i < n; ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  if (sxx == 0.0) throw std::invalid_argument("ols_fit: design is degenerate (constant x)");

  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;

  double ss_res = 0.0, ss_tot = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double pred = fit.intercept + fit.slope * xs[i];
    ss_res += (ys[i] - pred) * (ys[i] - pred);
    ss_tot += (ys[i] - my) * (ys[i] - my);
  }
  fit.r_squared = ss_tot == 0.0 ? 1.0 : 1.0 - ss_res / ss_tot;
  return fit;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double wilcoxon_signed_rank_less(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw std::invalid_argument("wilcoxon_signed_rank_less: length mismatch");
  }
  std::vector<double> diffs;
  diffs.reserve(xs.size());
  for (size_t i = 0; i < xs.size(); ++i) {
    const double d = xs[i] - ys[i];
    if (d != 0.0) diffs.push_back(d);
  }
  const size_t n = diffs.size();
  if (n == 0) return 1.0;

  std::vector<double> abs_diffs(n);
  for (size_t i = 0; i < n; ++i) abs_diffs[i] = std::fabs(diffs[i]);
  const auto ranks = average_ranks(abs_diffs);

  double w_plus = 0.0;
  for (size_t i = 0; i < n; ++i) {
    if (diffs[i] > 0.0) w_plus += ranks[i];
  }

  // Tie correction on the rank variance.
  double tie_term = 0.0;
  {
    std::vector<double> sorted(abs_diffs);
    std::sort(sorted.begin(), sorted.end());
    size_t i = 0;
    while (i < sorted.size()) {
      size_t j = i;
      while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i + 1);
      tie_term += t * t * t - t;
      i = j + 1;
    }
  }

  const double dn = static_cast<double>(n);
  const double mu = dn * (dn + 1.0) / 4.0;
  const double var = dn * (dn + 1.0) * (2.0 * dn + 1.0) / 24.0 - tie_term / 48.0;
  if (var <= 0.0) return 1.0;

  // Continuity-corrected lower tail: small W+ supports xs < ys.
  const double z = (w_plus - mu + 0.5) / std::sqrt(var);
  return normal_cdf(z);
}

}  // namespace nmslab
