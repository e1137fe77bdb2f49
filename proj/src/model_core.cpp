#include "spmem/model_core.hpp"

#include <cmath>
#include <numbers>

#include "spmem/rng_dists.hpp"

namespace spmem {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

void Params::validate(bool allow_zero_tau2) const {
  if (beta.size() < 1 || !beta.allFinite()) throw NumericError("params: invalid beta");
  if (!(sigma2 > 0) || !std::isfinite(sigma2))
    throw NumericError("params: sigma2 must be positive");
  if (!(omega2 > 0) || !std::isfinite(omega2))
    throw NumericError("params: omega2 must be positive");
  const bool tau_ok = allow_zero_tau2 ? (tau2 >= 0) : (tau2 > 0);
  if (!tau_ok || !std::isfinite(tau2))
    throw NumericError("params: tau2 must be positive");
  validate_kernel(kernel);
}

void LatentState::validate(const std::vector<bool>& error_mask) const {
  if (!epsilon.allFinite() || !v.allFinite())
    throw NumericError("latent state: non-finite entries");
  if (v.rows() != epsilon.size() ||
      v.cols() != static_cast<Eigen::Index>(error_mask.size()))
    throw NumericError("latent state: shape mismatch");
  for (Eigen::Index j = 0; j < v.cols(); ++j)
    if (!error_mask[j] && v.col(j).cwiseAbs().maxCoeff() != 0.0)
      throw NumericError("latent state: v must be zero in error-free columns");
}

void Hyperparams::validate() const {
  for (double c : {c1, c2, c3, c4, c5, c6, c7, c8, c9})
    if (!(c > 0) || !std::isfinite(c))
      throw NumericError("hyperparams: c1..c9 must be positive");
  if (!std::isfinite(gamma_gig)) throw NumericError("hyperparams: gamma must be finite");
}

double masked_beta_sq(const Vec& beta, const std::vector<bool>& error_mask) {
  double s = 0;
  for (Eigen::Index j = 0; j < beta.size(); ++j)
    if (error_mask[j]) s += beta[j] * beta[j];
  return s;
}

Vec residual_d(const Params& p, const LatentState& s, const Vec& y, const Mat& mu) {
  const double sigma = std::sqrt(p.sigma2);
  const double tau = std::sqrt(p.tau2);
  return y - mu * p.beta - sigma * s.epsilon - sigma * tau * (s.v * p.beta);
}

double marginal_loglik(const Params& p, const Vec& y, const Mat& mu,
                       const std::vector<bool>& error_mask, const Mat& corr) {
  const auto n = y.size();
  const double ridge = p.omega2 + p.tau2 * masked_beta_sq(p.beta, error_mask);
  Mat m = corr;
  m.diagonal().array() += ridge;
  const SpdFactor f = SpdFactor::compute(m);
  const Vec r = y - mu * p.beta;
  const Vec half = f.solve_lower(r);
  const double quad = half.squaredNorm() / p.sigma2;
  const double logdet = static_cast<double>(n) * std::log(p.sigma2) + f.logdet();
  return -0.5 * (static_cast<double>(n) * kLog2Pi + logdet + quad);
}

double marginal_loglik(const Params& p, const SpatialDataset& data,
                       const DistanceMatrix& dist) {
  return marginal_loglik(p, data.y(), data.mu(), data.error_mask(),
                         build_corr_matrix(dist, p.kernel));
}

double conditional_loglik(const Params& p, const LatentState& s,
                          const SpatialDataset& data) {
  const Vec d = residual_d(p, s, data.y(), data.mu());
  const double noise = p.sigma2 * p.omega2;
  return -0.5 * (data.n() * (kLog2Pi + std::log(noise)) + d.squaredNorm() / noise);
}

double log_prior(const Params& p, const Hyperparams& h, double med_d) {
  const auto pdim = p.beta.size();
  double lp = -0.5 * (static_cast<double>(pdim) * (kLog2Pi + std::log(h.c1)) +
                      p.beta.squaredNorm() / h.c1);

  // sigma^2 ~ inverse-gamma(c2, c3)
  lp += h.c2 * std::log(h.c3) - std::lgamma(h.c2) - (h.c2 + 1.0) * std::log(p.sigma2) -
        h.c3 / p.sigma2;

  lp += gig_logpdf(p.omega2, GigParams{h.gamma_gig, h.c4, h.c5});
  lp += gig_logpdf(p.tau2, GigParams{0.0, h.c6, h.c7});

  std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, ExponentialKernel>) {
          const double rate = h.c8 / med_d;
          lp += std::log(rate) - rate * k.theta;
        } else {
          const double rate1 = h.c8 / med_d;
          lp += std::log(rate1) - rate1 * k.theta1;
          lp += std::log(h.c9) - h.c9 * k.theta2;
        }
      },
      p.kernel);
  return lp;
}

}  // namespace spmem
