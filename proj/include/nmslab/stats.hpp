#ifndef NMSLAB_STATS_HPP
#define NMSLAB_STATS_HPP

#include <span>
#include <vector>

namespace nmslab {

double mean(std::span<const double> xs);

// Exact median: middle element for odd n, average of the two middle elements
// for even n.
double median(std::span<const double> xs);

// Average ranks (1-based), ties share the mean of their rank block.
std::vector<double> average_ranks(std::span<const double> xs);

// Spearman rank correlation with average ranks for ties. Throws on length
// mismatch, n < 2, or an all-constant side (undefined rank variance).
double spearman(std::span<const double> xs, std::span<const double> ys);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

// Ordinary least squares of y on x. Throws when x is constant.
LinearFit ols_fit(std::span<const double> xs, std::span<const double> ys);

double normal_cdf(double z);

// One-sided Wilcoxon signed-rank test (normal approximation with tie
// correction, zeros dropped) for the alternative "xs tend to be smaller
// than ys". Returns the p-value; 1.0 when every pair is tied.
double wilcoxon_signed_rank_less(std::span<const double> xs, std::span<const double> ys);

}  // namespace nmslab

#endif  // NMSLAB_STATS_HPP
