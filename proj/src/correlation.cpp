#include "spmem/correlation.hpp"

#include <cmath>

#include "spmem/rng_dists.hpp"

namespace spmem {

void validate_kernel(const KernelSpec& k) {
  std::visit(
      [](const auto& kk) {
        using T = std::decay_t<decltype(kk)>;
        if constexpr (std::is_same_v<T, ExponentialKernel>) {
          if (!(kk.theta > 0) || !std::isfinite(kk.theta))
            throw NumericError("exponential kernel needs a positive finite range");
        } else {
          if (!(kk.theta1 > 0) || !std::isfinite(kk.theta1) || !(kk.theta2 > 0) ||
              !std::isfinite(kk.theta2))
            throw NumericError("matern kernel needs positive finite parameters");
        }
      },
      k);
}

bool is_matern(const KernelSpec& k) {
  return std::holds_alternative<MaternKernel>(k);
}

double exponential_corr(double h, double theta) {
  if (!(theta > 0)) throw NumericError("exponential_corr: range must be positive");
  if (h < 0) throw NumericError("exponential_corr: negative distance");
  return std::exp(-h / theta);
}

double matern_corr(double h, double theta1, double theta2) {
  if (!(theta1 > 0) || !(theta2 > 0))
    throw NumericError("matern_corr: parameters must be positive");
  if (h < 0) throw NumericError("matern_corr: negative distance");
  if (h == 0) return 1.0;
  const double u = h / theta1;
  // log of (2^{1-v}/Gamma(v)) u^v K_v(u); keeps large-v and large-u cases
  // inside double range.
  const double lk = log_bessel_k(theta2, u);
  if (!std::isfinite(lk)) return 0.0;  // K underflowed
  const double lc =
      (1.0 - theta2) * std::log(2.0) - std::lgamma(theta2) + theta2 * std::log(u) + lk;
  const double value = std::exp(lc);
  return value > 1.0 ? 1.0 : value;  // clip rounding at tiny h
}

double kernel_corr(double h, const KernelSpec& k) {
  return std::visit(
      [&](const auto& kk) {
        using T = std::decay_t<decltype(kk)>;
        if constexpr (std::is_same_v<T, ExponentialKernel>)
          return exponential_corr(h, kk.theta);
        else
          return matern_corr(h, kk.theta1, kk.theta2);
      },
      k);
}

Mat build_corr_matrix(const DistanceMatrix& d, const KernelSpec& k) {
  validate_kernel(k);
  const int n = d.n();
  if (const auto* e = std::get_if<ExponentialKernel>(&k)) {
    // vectorized: exp is the sampler's hot path
    Mat c = (-d.d() / e->theta).array().exp().matrix();
    c.diagonal().setOnes();
    return c;
  }
  const auto& m = std::get<MaternKernel>(k);
  Mat c = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    c(i, i) = 1.0;
    for (int j = i + 1; j < n; ++j) {
      c(i, j) = matern_corr(d(i, j), m.theta1, m.theta2);
      c(j, i) = c(i, j);
    }
  }
  return c;
}

SpdFactor SpdFactor::compute(const Mat& m) {
  const auto n = m.rows();
  if (n < 1 || m.cols() != n) throw NumericError("spd factor: matrix must be square");
  const double scale = m.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (std::abs(m(i, j) - m(j, i)) > 1e-8 * (scale > 0 ? scale : 1.0))
        throw NumericError("spd factor: matrix is not symmetric");

  const double tol = 1e-12 * m.diagonal().maxCoeff();

  Eigen::LLT<Mat> llt(m);
  Mat l = llt.matrixL();
  if (llt.info() != Eigen::Success) {
    // locate the offending pivot for the error message
    Mat ref = Mat::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      double d = m(j, j) - ref.row(j).head(j).squaredNorm();
      if (d <= tol)
        throw NumericError("matrix not positive definite at pivot " + std::to_string(j));
      ref(j, j) = std::sqrt(d);
      for (Eigen::Index i = j + 1; i < n; ++i)
        ref(i, j) =
            (m(i, j) - ref.row(i).head(j).dot(ref.row(j).head(j))) / ref(j, j);
    }
    throw NumericError("matrix not positive definite");
  }
  double logdet = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double pivot = l(j, j) * l(j, j);
    if (!(pivot > tol))
      throw NumericError("matrix not positive definite at pivot " + std::to_string(j));
    logdet += 2.0 * std::log(l(j, j));
  }
  return SpdFactor(std::move(l), logdet);
}

Vec SpdFactor::solve(const Vec& b) const {
  Vec x = l_.triangularView<Eigen::Lower>().solve(b);
  l_.triangularView<Eigen::Lower>().transpose().solveInPlace(x);
  return x;
}

Mat SpdFactor::solve_matrix(const Mat& b) const {
  Mat x = l_.triangularView<Eigen::Lower>().solve(b);
  l_.triangularView<Eigen::Lower>().transpose().solveInPlace(x);
  return x;
}

Vec SpdFactor::solve_lower(const Vec& b) const {
  return l_.triangularView<Eigen::Lower>().solve(b);
}

Vec SpdFactor::solve_lower_t(const Vec& b) const {
  return l_.triangularView<Eigen::Lower>().transpose().solve(b);
}

Mat SpdFactor::inverse() const {
  return solve_matrix(Mat::Identity(l_.rows(), l_.rows()));
}

}  // namespace spmem
