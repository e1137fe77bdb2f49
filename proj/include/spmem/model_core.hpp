#pragma once

#include "spmem/correlation.hpp"
#include "spmem/data_model.hpp"

namespace spmem {

// Full parameter vector: regression coefficients, partial sill, relative
// nugget, relative measurement-error variance and kernel parameters.
struct Params {
  Vec beta;
  double sigma2 = 1;
  double omega2 = 1;
  double tau2 = 1;
  KernelSpec kernel = ExponentialKernel{1.0};

  // The naive variant runs with tau2 pinned to zero.
  void validate(bool allow_zero_tau2 = false) const;
};

// Data-augmentation variables: the spatial field values and the
// standardized measurement-error field (zero in error-free columns).
struct LatentState {
  Vec epsilon;
  Mat v;

  void validate(const std::vector<bool>& error_mask) const;
};

struct Hyperparams {
  double c1 = 10;     // beta prior variance
  double c2 = 1.1;    // sigma^2 inverse-gamma shape
  double c3 = 0.11;   // sigma^2 inverse-gamma rate
  double c4 = 0.05;   // omega^2 GIG a
  double c5 = 2;      // omega^2 GIG b
  double c6 = 0.09;   // tau^2 GIG a
  double c7 = 2;      // tau^2 GIG b
  double c8 = 1;      // theta1 prior: Exp(c8 / med(d))
  double c9 = 1;      // theta2 prior: Exp(c9)
  double gamma_gig = 0.001;  // omega^2 GIG order

  void validate() const;
};

// Sum of squared coefficients over error-prone columns only.
double masked_beta_sq(const Vec& beta, const std::vector<bool>& error_mask);

// Residuals d_i = y_i - mu_i'beta - sigma eps_i - sigma tau v_i'beta.
Vec residual_d(const Params& p, const LatentState& s, const Vec& y, const Mat& mu);

// Log-density of y ~ N(mu beta, sigma^2 [corr + (omega^2 + tau^2 b'b) I])
// where b'b runs over error-prone coefficients.
double marginal_loglik(const Params& p, const Vec& y, const Mat& mu,
                       const std::vector<bool>& error_mask, const Mat& corr);
double marginal_loglik(const Params& p, const SpatialDataset& data,
                       const DistanceMatrix& dist);

// White-noise likelihood given both latent fields:
// sum_i log N(d_i; 0, sigma^2 omega^2).
double conditional_loglik(const Params& p, const LatentState& s,
                          const SpatialDataset& data);

double log_prior(const Params& p, const Hyperparams& h, double med_d);

}  // namespace spmem
