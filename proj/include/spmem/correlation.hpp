#pragma once

#include <variant>

#include "spmem/data_model.hpp"

namespace spmem {

struct ExponentialKernel {
  double theta = 1.0;  // range
};

struct MaternKernel {
  double theta1 = 1.0;  // range
  double theta2 = 0.5;  // smoothness
};

using KernelSpec = std::variant<ExponentialKernel, MaternKernel>;

void validate_kernel(const KernelSpec& k);
bool is_matern(const KernelSpec& k);

// exp(-h/theta)
double exponential_corr(double h, double theta);

// (2^{1-v}/Gamma(v)) (h/r)^v K_v(h/r) with range r and smoothness v;
// exactly 1 at h = 0.
double matern_corr(double h, double theta1, double theta2);

double kernel_corr(double h, const KernelSpec& k);

// Symmetric correlation matrix with unit diagonal.
Mat build_corr_matrix(const DistanceMatrix& d, const KernelSpec& k);

// Cholesky factor of a symmetric positive-definite matrix with the cached
// log-determinant. Pivots below 1e-12 times the largest diagonal entry are
// treated as a factorization failure.
class SpdFactor {
 public:
  static SpdFactor compute(const Mat& m);

  int dim() const { return static_cast<int>(l_.rows()); }
  const Mat& lower() const { return l_; }
  double logdet() const { return logdet_; }

  Vec solve(const Vec& b) const;       // M^{-1} b
  Mat solve_matrix(const Mat& b) const;
  Vec solve_lower(const Vec& b) const;    // L^{-1} b
  Vec solve_lower_t(const Vec& b) const;  // L^{-T} b
  Mat inverse() const;

 private:
  SpdFactor(Mat l, double logdet) : l_(std::move(l)), logdet_(logdet) {}
  Mat l_;
  double logdet_ = 0;
};

}  // namespace spmem
