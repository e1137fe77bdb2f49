#include "spmem/stats.hpp"

#include <algorithm>
#include <cmath>

#include "spmem/errors.hpp"

namespace spmem {

double kahan_sum(const std::vector<double>& xs) {
  double sum = 0, carry = 0;
  for (double x : xs) {
    const double t = x - carry;
    const double s = sum + t;
    carry = (s - sum) - t;
    sum = s;
  }
  return sum;
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) throw NumericError("mean of empty vector");
  return kahan_sum(xs) / static_cast<double>(xs.size());
}

double sample_variance(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  std::vector<double> sq(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) sq[i] = (xs[i] - m) * (xs[i] - m);
  return kahan_sum(sq) / static_cast<double>(xs.size() - 1);
}

double quantile_type7_sorted(const std::vector<double>& sorted, double prob) {
  if (sorted.empty()) throw NumericError("quantile of empty vector");
  if (prob <= 0) return sorted.front();
  if (prob >= 1) return sorted.back();
  const auto n = sorted.size();
  const double h = (static_cast<double>(n) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, n - 1);
  return sorted[lo] + (h - std::floor(h)) * (sorted[hi] - sorted[lo]);
}

}  // namespace spmem
