#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spmem/model_core.hpp"
#include "spmem/rng_dists.hpp"

namespace spmem {

// Random-walk step sizes on the log scale of each positive parameter.
struct StepSizes {
  double sigma2 = 0.5;
  double tau2 = 0.5;
  double theta1 = 0.5;
  double theta2 = 0.5;
};

// How the sweep refreshes the measurement-error field V.
//   exact:        per-row conditional of V under its i.i.d. N(0,1) prior;
//                 bounded for any beta, so chains cannot blow up.
//   minimum_norm: draw w = V beta from its aggregated conditional and
//                 recover V as the minimum-norm solution; degenerates as
//                 the error-prone coefficients approach zero.
enum class VUpdate { exact, minimum_norm };

struct SamplerConfig {
  std::int64_t n_iter = 75000;
  std::int64_t burn_in = 25000;
  std::int64_t thin = 10;
  int n_chains = 1;
  StepSizes steps;
  std::uint64_t seed = 0;
  bool naive = false;  // tau^2 and V pinned to zero, their blocks skipped
  bool adapt = true;   // Robbins-Monro step tuning during burn-in
  VUpdate v_update = VUpdate::exact;

  std::int64_t kept_draws() const { return (n_iter - burn_in) / thin; }
  void validate() const;
};

struct Draw {
  Params params;
  LatentState latent;
};

struct BlockAccept {
  std::int64_t accepted = 0;
  std::int64_t attempts = 0;
  double rate() const { return attempts ? double(accepted) / double(attempts) : 0.0; }
};

struct AcceptanceRates {
  BlockAccept sigma2, tau2, theta1, theta2;
};

// Post-burn-in, thinned draws plus the settings that produced them.
struct Chain {
  std::vector<Draw> draws;
  AcceptanceRates accept;
  SamplerConfig config;
  StepSizes tuned_steps;
};

// Flattened parameter order used by traces, summaries and chain files:
// beta0..beta{p-1}, sigma2, omega2, tau2, theta1[, theta2].
std::vector<std::string> param_names(const Params& p);
Vec param_vector(const Params& p);
std::vector<double> chain_trace(const Chain& c, int param_index);

// ---- Gibbs blocks (exact forms of the model's full conditionals) ----

// eps | v, eta, y ~ N(A1^{-1} z*, A1^{-1}), A1 = I/omega^2 + C^{-1},
// z*_i = (y_i - mu_i'beta - sigma tau v_i'beta) / (omega^2 sigma).
// Computed through M = C + omega^2 I (A1^{-1} = C - C M^{-1} C), which stays
// well-conditioned even when C itself is nearly singular.
Vec sample_epsilon(const Params& p, const LatentState& s, const Vec& y, const Mat& mu,
                   const Mat& corr, const SpdFactor& corr_chol, RngState& rng);

struct VDraw {
  Mat v;
  bool degenerate = false;  // all error-prone coefficients were zero
};

// Draws w = V beta ~ N(A2^{-1} r*, A2^{-1}) with A2 = (tau^2/omega^2 + 1) I,
// then recovers V as the minimum-norm solution over error-prone columns.
VDraw sample_v(const Params& p, const LatentState& s, const Vec& y, const Mat& mu,
               const std::vector<bool>& error_mask, RngState& rng);

// Row-wise conditional of V itself: v_i ~ N(kappa r_i S b, S) on the
// error-prone coordinates, S = (I + kappa b b')^{-1}, kappa = tau^2/omega^2.
Mat sample_v_exact(const Params& p, const LatentState& s, const Vec& y, const Mat& mu,
                   const std::vector<bool>& error_mask, RngState& rng);

// beta | ... ~ N(A3^{-1} F, A3^{-1}) with A3 = T*'T*/(sigma^2 omega^2) + I/c1.
Vec sample_beta(const Params& p, const LatentState& s, const Vec& y, const Mat& mu,
                const Hyperparams& h, RngState& rng);

struct MhScalar {
  double value = 0;
  bool accepted = false;
};

// Unnormalized log full conditionals targeted by the MH blocks; exposed so
// quadrature oracles can integrate the exact same functions.
double log_cond_sigma2(double sigma2, const Params& rest, const LatentState& s,
                       const Vec& y, const Mat& mu, const Hyperparams& h);
double log_cond_tau2(double tau2, const Params& rest, const LatentState& s,
                     const Vec& y, const Mat& mu, const Hyperparams& h);
double log_cond_theta(const KernelSpec& k, const Vec& epsilon,
                      const DistanceMatrix& dist, const Hyperparams& h, double med_d);

// Log-scale random-walk Metropolis on sigma^2; the target is
// (1/s2)^{n/2+c2+1} exp{-(1/2w2) sum(q* - q/s)^2 - c3/s2}.
MhScalar mh_sigma2(const Params& p, const LatentState& s, const Vec& y, const Mat& mu,
                   const Hyperparams& h, double step, RngState& rng);

// omega^2 | ... ~ GIG(gamma - n/2, sqrt(d*), c5), d* = c4^2 + sum d_i^2/sigma^2.
double sample_omega2(const Params& p, const LatentState& s, const Vec& y, const Mat& mu,
                     const Hyperparams& h, RngState& rng);

// Log-scale random walk on tau^2 against
// (1/t2) exp{-[c6^2/t2 + c7^2 t2 + (1/w2) sum(r* - t v'beta)^2]/2}.
MhScalar mh_tau2(const Params& p, const LatentState& s, const Vec& y, const Mat& mu,
                 const Hyperparams& h, double step, RngState& rng);

// Correlation matrix state shared by the theta block and the epsilon draw.
struct CorrCache {
  CorrCache(const DistanceMatrix& dist, const KernelSpec& k);
  KernelSpec kernel;
  Mat corr;
  SpdFactor chol;
};

struct ThetaDraw {
  KernelSpec kernel;
  bool accepted1 = false;
  bool accepted2 = false;  // matern only
};

// Log-scale random walk per kernel parameter against
// |C|^{-1/2} exp{-eps'C^{-1}eps/2 - rate * theta}; rebuilds C at each
// proposal and refreshes the cache on acceptance. SPD failures reject.
ThetaDraw mh_theta(const Vec& epsilon, const DistanceMatrix& dist,
                   const Hyperparams& h, double med_d, const StepSizes& steps,
                   RngState& rng, CorrCache& cache);

// ---- Full sweep ----

class GibbsSampler {
 public:
  GibbsSampler(const SpatialDataset& data, const DistanceMatrix& dist,
               const Hyperparams& hyper, const SamplerConfig& config, Params init,
               LatentState init_latent, RngState rng);

  // One sweep in the order eps, V, beta, sigma^2, omega^2, tau^2, theta.
  void step();

  std::int64_t iteration() const { return iter_; }
  const Params& params() const { return params_; }
  const LatentState& latent() const { return latent_; }
  const AcceptanceRates& acceptance() const { return accept_; }
  const StepSizes& steps() const { return steps_; }
  double median_dist() const { return med_d_; }

  // Replaces the response vector; used by calibration harnesses.
  void set_response(const Vec& y);
  const Vec& response() const { return y_; }
  RngState& rng() { return rng_; }

 private:
  void adapt_step(double& log_step_target, bool accepted);

  Vec y_;
  Mat mu_;
  std::vector<bool> mask_;
  DistanceMatrix dist_;
  Hyperparams hyper_;
  SamplerConfig config_;
  Params params_;
  LatentState latent_;
  RngState rng_;
  CorrCache cache_;
  StepSizes steps_;
  double med_d_;
  std::int64_t iter_ = 0;
  AcceptanceRates accept_;
};

Chain run_chain(const SpatialDataset& data, const Hyperparams& hyper,
                const SamplerConfig& config, const Params& init,
                const LatentState& init_latent);

// Runs config.n_chains chains with substreams of config.seed; chain k>0
// randomizes nothing beyond its stream. `workers` bounds thread count.
std::vector<Chain> run_chains(const SpatialDataset& data, const Hyperparams& hyper,
                              const SamplerConfig& config, const Params& init,
                              const LatentState& init_latent, int workers = 1);

}  // namespace spmem
