#pragma once

#include <vector>

namespace spmem {

double kahan_sum(const std::vector<double>& xs);
double mean_of(const std::vector<double>& xs);
double sample_variance(const std::vector<double>& xs);  // n-1 denominator

// Linear-interpolation (type 7) quantile of a pre-sorted vector.
double quantile_type7_sorted(const std::vector<double>& sorted, double prob);

}  // namespace spmem
