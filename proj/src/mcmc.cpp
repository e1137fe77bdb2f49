#include "spmem/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <thread>

namespace spmem {

void SamplerConfig::validate() const {
  if (n_iter < 1 || burn_in < 0 || burn_in >= n_iter)
    throw ConfigError("sampler: need 0 <= burn_in < n_iter");
  if (thin < 1) throw ConfigError("sampler: thin must be >= 1");
  if (n_chains < 1) throw ConfigError("sampler: n_chains must be >= 1");
  for (double s : {steps.sigma2, steps.tau2, steps.theta1, steps.theta2})
    if (!(s > 0)) throw ConfigError("sampler: step sizes must be positive");
}

std::vector<std::string> param_names(const Params& p) {
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < p.beta.size(); ++j)
    names.push_back("beta" + std::to_string(j));
  names.insert(names.end(), {"sigma2", "omega2", "tau2", "theta1"});
  if (is_matern(p.kernel)) names.push_back("theta2");
  return names;
}

Vec param_vector(const Params& p) {
  const auto pd = p.beta.size();
  const bool matern = is_matern(p.kernel);
  Vec v(pd + 4 + (matern ? 1 : 0));
  v.head(pd) = p.beta;
  v[pd] = p.sigma2;
  v[pd + 1] = p.omega2;
  v[pd + 2] = p.tau2;
  if (matern) {
    const auto& k = std::get<MaternKernel>(p.kernel);
    v[pd + 3] = k.theta1;
    v[pd + 4] = k.theta2;
  } else {
    v[pd + 3] = std::get<ExponentialKernel>(p.kernel).theta;
  }
  return v;
}

std::vector<double> chain_trace(const Chain& c, int param_index) {
  std::vector<double> out;
  out.reserve(c.draws.size());
  for (const auto& d : c.draws) out.push_back(param_vector(d.params)[param_index]);
  return out;
}

Vec sample_epsilon(const Params& p, const LatentState& s, const Vec& y, const Mat& mu,
                   const Mat& corr, const SpdFactor& corr_chol, RngState& rng) {
  const auto n = y.size();
  const double sigma = std::sqrt(p.sigma2);
  const double tau = std::sqrt(p.tau2);
  const Vec zstar = (y - mu * p.beta - sigma * tau * (s.v * p.beta)) / (p.omega2 * sigma);

  const Vec u = corr_chol.lower() * rng.normal_vec(static_cast<int>(n));
  const double noise_sd = std::sqrt(p.omega2);
  Vec w(n);
  for (Eigen::Index i = 0; i < n; ++i) w[i] = noise_sd * rng.normal();

  Mat m = corr;
  m.diagonal().array() += p.omega2;
  const SpdFactor f = SpdFactor::compute(m);
  return u + corr * (zstar - f.solve(corr * zstar + u + w));
}

VDraw sample_v(const Params& p, const LatentState& s, const Vec& y, const Mat& mu,
               const std::vector<bool>& error_mask, RngState& rng) {
  const auto n = y.size();
  VDraw out{Mat::Zero(n, mu.cols()), false};
  const double bsq = masked_beta_sq(p.beta, error_mask);
  // numerically-zero coefficients make the minimum-norm recovery w/|b|^2
  // blow up; treat them like the exact-zero degenerate case
  if (bsq < 1e-12) {
    out.degenerate = true;
    return out;
  }
  const double sigma = std::sqrt(p.sigma2);
  const double tau = std::sqrt(p.tau2);
  const double kappa = p.tau2 / p.omega2;
  const double mean_scale = kappa / (kappa + 1.0);
  const double sd = 1.0 / std::sqrt(kappa + 1.0);
  const Vec r = (y - mu * p.beta - sigma * s.epsilon) / (sigma * tau);
  Vec w(n);
  for (Eigen::Index i = 0; i < n; ++i) w[i] = mean_scale * r[i] + sd * rng.normal();
  for (Eigen::Index j = 0; j < mu.cols(); ++j)
    if (error_mask[j]) out.v.col(j) = w * (p.beta[j] / bsq);
  return out;
}

Mat sample_v_exact(const Params& p, const LatentState& s, const Vec& y, const Mat& mu,
                   const std::vector<bool>& error_mask, RngState& rng) {
  const auto n = y.size();
  Mat v = Mat::Zero(n, mu.cols());
  std::vector<Eigen::Index> masked;
  for (Eigen::Index j = 0; j < mu.cols(); ++j)
    if (error_mask[j]) masked.push_back(j);
  const auto pm = static_cast<Eigen::Index>(masked.size());
  if (pm == 0) return v;

  const double sigma = std::sqrt(p.sigma2);
  const double tau = std::sqrt(p.tau2);
  const double kappa = p.tau2 / p.omega2;
  Vec bm(pm);
  for (Eigen::Index k = 0; k < pm; ++k) bm[k] = p.beta[masked[k]];
  const double shrink = 1.0 / (1.0 + kappa * bm.squaredNorm());

  // S = I - kappa b b' / (1 + kappa |b|^2); factor once, reuse per row
  Mat cov = Mat::Identity(pm, pm) - (kappa * shrink) * (bm * bm.transpose());
  const SpdFactor chol = SpdFactor::compute(cov);
  const Vec mean_dir = (kappa * shrink) * bm;

  const Vec r = (y - mu * p.beta - sigma * s.epsilon) / (sigma * tau);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec vi = r[i] * mean_dir + chol.lower() * rng.normal_vec(static_cast<int>(pm));
    for (Eigen::Index k = 0; k < pm; ++k) v(i, masked[k]) = vi[k];
  }
  return v;
}

Vec sample_beta(const Params& p, const LatentState& s, const Vec& y, const Mat& mu,
                const Hyperparams& h, RngState& rng) {
  const double sigma = std::sqrt(p.sigma2);
  const double tau = std::sqrt(p.tau2);
  const double noise = p.sigma2 * p.omega2;
  const Mat tstar = mu + sigma * tau * s.v;
  const Vec t = y - sigma * s.epsilon;
  Mat a3 = tstar.transpose() * tstar / noise;
  a3.diagonal().array() += 1.0 / h.c1;
  const SpdFactor f = SpdFactor::compute(a3);
  return sample_mvn_prec(f.solve(tstar.transpose() * t / noise), f, rng);
}

double log_cond_sigma2(double sigma2, const Params& rest, const LatentState& s,
                       const Vec& y, const Mat& mu, const Hyperparams& h) {
  const double tau = std::sqrt(rest.tau2);
  const Vec q = y - mu * rest.beta;
  const Vec qstar = s.epsilon + tau * (s.v * rest.beta);
  const double n = static_cast<double>(y.size());
  const double sigma = std::sqrt(sigma2);
  return -(0.5 * n + h.c2 + 1.0) * std::log(sigma2) -
         (qstar - q / sigma).squaredNorm() / (2.0 * rest.omega2) - h.c3 / sigma2;
}

double log_cond_tau2(double tau2, const Params& rest, const LatentState& s,
                     const Vec& y, const Mat& mu, const Hyperparams& h) {
  const double sigma = std::sqrt(rest.sigma2);
  const Vec rstar = (y - mu * rest.beta - sigma * s.epsilon) / sigma;
  const Vec vb = s.v * rest.beta;
  const double tau = std::sqrt(tau2);
  return -std::log(tau2) -
         0.5 * (h.c6 * h.c6 / tau2 + h.c7 * h.c7 * tau2 +
                (rstar - tau * vb).squaredNorm() / rest.omega2);
}

double log_cond_theta(const KernelSpec& k, const Vec& epsilon,
                      const DistanceMatrix& dist, const Hyperparams& h, double med_d) {
  const Mat corr = build_corr_matrix(dist, k);
  const SpdFactor chol = SpdFactor::compute(corr);
  double lp = -0.5 * chol.logdet() - 0.5 * chol.solve_lower(epsilon).squaredNorm();
  std::visit(
      [&](const auto& kk) {
        using T = std::decay_t<decltype(kk)>;
        if constexpr (std::is_same_v<T, ExponentialKernel>) {
          lp -= h.c8 / med_d * kk.theta;
        } else {
          lp -= h.c8 / med_d * kk.theta1 + h.c9 * kk.theta2;
        }
      },
      k);
  return lp;
}

namespace {

// One random-walk step on log x against log_target(x) + log x.
template <typename F>
MhScalar log_walk(double x, double step, F&& log_target, RngState& rng) {
  const double phi = std::log(x);
  const double phi_new = phi + step * rng.normal();
  const double x_new = std::exp(phi_new);
  const double log_ratio = log_target(x_new) + phi_new - log_target(x) - phi;
  if (std::log(rng.uniform()) < log_ratio) return {x_new, true};
  return {x, false};
}

}  // namespace

MhScalar mh_sigma2(const Params& p, const LatentState& s, const Vec& y, const Mat& mu,
                   const Hyperparams& h, double step, RngState& rng) {
  return log_walk(
      p.sigma2, step,
      [&](double s2) { return log_cond_sigma2(s2, p, s, y, mu, h); }, rng);
}

double sample_omega2(const Params& p, const LatentState& s, const Vec& y, const Mat& mu,
                     const Hyperparams& h, RngState& rng) {
  const Vec d = residual_d(p, s, y, mu);
  const double dstar = h.c4 * h.c4 + d.squaredNorm() / p.sigma2;
  const GigParams g{h.gamma_gig - 0.5 * static_cast<double>(y.size()), std::sqrt(dstar),
                    h.c5};
  return sample_gig(g, rng);
}

MhScalar mh_tau2(const Params& p, const LatentState& s, const Vec& y, const Mat& mu,
                 const Hyperparams& h, double step, RngState& rng) {
  return log_walk(
      p.tau2, step, [&](double t2) { return log_cond_tau2(t2, p, s, y, mu, h); }, rng);
}

CorrCache::CorrCache(const DistanceMatrix& dist, const KernelSpec& k)
    : kernel(k), corr(build_corr_matrix(dist, k)), chol(SpdFactor::compute(corr)) {}

namespace {

double theta_field_logdens(const Vec& epsilon, const SpdFactor& chol) {
  return -0.5 * chol.logdet() - 0.5 * chol.solve_lower(epsilon).squaredNorm();
}

// Proposes theta' = exp(log theta + step z) for one kernel parameter;
// returns true and refreshes the cache when accepted.
bool theta_log_walk(const Vec& epsilon, const DistanceMatrix& dist, double step,
                    double prior_rate, double current, RngState& rng, CorrCache& cache,
                    const std::function<KernelSpec(double)>& with_value) {
  const double phi = std::log(current);
  const double phi_new = phi + step * rng.normal();
  const double value_new = std::exp(phi_new);
  const double u = rng.uniform();  // consumed even on SPD auto-reject
  KernelSpec proposal = with_value(value_new);
  try {
    Mat corr_new = build_corr_matrix(dist, proposal);
    SpdFactor chol_new = SpdFactor::compute(corr_new);
    const double log_ratio = theta_field_logdens(epsilon, chol_new) -
                             theta_field_logdens(epsilon, cache.chol) -
                             prior_rate * (value_new - current) + phi_new - phi;
    if (std::log(u) < log_ratio) {
      cache.kernel = proposal;
      cache.corr = std::move(corr_new);
      cache.chol = std::move(chol_new);
      return true;
    }
  } catch (const NumericError&) {
    // non-factorable proposal: reject
  }
  return false;
}

}  // namespace

ThetaDraw mh_theta(const Vec& epsilon, const DistanceMatrix& dist, const Hyperparams& h,
                   double med_d, const StepSizes& steps, RngState& rng,
                   CorrCache& cache) {
  ThetaDraw out{cache.kernel, false, false};
  const double rate1 = h.c8 / med_d;
  if (const auto* e = std::get_if<ExponentialKernel>(&cache.kernel)) {
    out.accepted1 = theta_log_walk(epsilon, dist, steps.theta1, rate1, e->theta, rng,
                                   cache, [](double v) -> KernelSpec {
                                     return ExponentialKernel{v};
                                   });
  } else {
    const auto m0 = std::get<MaternKernel>(cache.kernel);
    out.accepted1 = theta_log_walk(epsilon, dist, steps.theta1, rate1, m0.theta1, rng,
                                   cache, [&](double v) -> KernelSpec {
                                     auto m = std::get<MaternKernel>(cache.kernel);
                                     m.theta1 = v;
                                     return m;
                                   });
    const auto m1 = std::get<MaternKernel>(cache.kernel);
    out.accepted2 = theta_log_walk(epsilon, dist, steps.theta2, h.c9, m1.theta2, rng,
                                   cache, [&](double v) -> KernelSpec {
                                     auto m = std::get<MaternKernel>(cache.kernel);
                                     m.theta2 = v;
                                     return m;
                                   });
  }
  out.kernel = cache.kernel;
  return out;
}

GibbsSampler::GibbsSampler(const SpatialDataset& data, const DistanceMatrix& dist,
                           const Hyperparams& hyper, const SamplerConfig& config,
                           Params init, LatentState init_latent, RngState rng)
    : y_(data.y()),
      mu_(data.mu()),
      mask_(data.error_mask()),
      dist_(dist),
      hyper_(hyper),
      config_(config),
      params_(std::move(init)),
      latent_(std::move(init_latent)),
      rng_(rng),
      cache_(dist, params_.kernel),
      steps_(config.steps),
      med_d_(median_distance(dist)) {
  hyper_.validate();
  config_.validate();
  if (config_.naive) {
    params_.tau2 = 0.0;
    latent_.v.setZero();
  }
  params_.validate(config_.naive);
  latent_.validate(mask_);
  if (latent_.epsilon.size() != y_.size() || latent_.v.rows() != y_.size() ||
      latent_.v.cols() != mu_.cols())
    throw ConfigError("initial latent state has wrong dimensions");
}

void GibbsSampler::set_response(const Vec& y) {
  if (y.size() != y_.size()) throw ConfigError("response length mismatch");
  y_ = y;
}

void GibbsSampler::adapt_step(double& step, bool accepted) {
  // Robbins-Monro toward 30% acceptance, frozen after burn-in
  const double gain = 1.0 / std::pow(static_cast<double>(iter_) + 1.0, 0.6);
  step = std::exp(std::log(step) + gain * ((accepted ? 1.0 : 0.0) - 0.3));
  step = std::clamp(step, 1e-3, 10.0);
}

void GibbsSampler::step() {
  const bool tuning = config_.adapt && iter_ < config_.burn_in;
  const bool counting = iter_ >= config_.burn_in;

  latent_.epsilon = sample_epsilon(params_, latent_, y_, mu_, cache_.corr, cache_.chol, rng_);

  if (!config_.naive) {
    if (config_.v_update == VUpdate::exact) {
      latent_.v = sample_v_exact(params_, latent_, y_, mu_, mask_, rng_);
    } else {
      VDraw vd = sample_v(params_, latent_, y_, mu_, mask_, rng_);
      if (!vd.degenerate) latent_.v = std::move(vd.v);
    }
  }

  params_.beta = sample_beta(params_, latent_, y_, mu_, hyper_, rng_);

  {
    MhScalar r = mh_sigma2(params_, latent_, y_, mu_, hyper_, steps_.sigma2, rng_);
    params_.sigma2 = r.value;
    if (tuning) adapt_step(steps_.sigma2, r.accepted);
    if (counting) {
      ++accept_.sigma2.attempts;
      accept_.sigma2.accepted += r.accepted;
    }
  }

  params_.omega2 = sample_omega2(params_, latent_, y_, mu_, hyper_, rng_);

  if (!config_.naive) {
    MhScalar r = mh_tau2(params_, latent_, y_, mu_, hyper_, steps_.tau2, rng_);
    params_.tau2 = r.value;
    if (tuning) adapt_step(steps_.tau2, r.accepted);
    if (counting) {
      ++accept_.tau2.attempts;
      accept_.tau2.accepted += r.accepted;
    }
  }

  {
    ThetaDraw td = mh_theta(latent_.epsilon, dist_, hyper_, med_d_, steps_, rng_, cache_);
    params_.kernel = td.kernel;
    if (tuning) adapt_step(steps_.theta1, td.accepted1);
    if (counting) {
      ++accept_.theta1.attempts;
      accept_.theta1.accepted += td.accepted1;
    }
    if (is_matern(params_.kernel)) {
      if (tuning) adapt_step(steps_.theta2, td.accepted2);
      if (counting) {
        ++accept_.theta2.attempts;
        accept_.theta2.accepted += td.accepted2;
      }
    }
  }

  ++iter_;
}

namespace {

Chain run_single(const SpatialDataset& data, const Hyperparams& hyper,
                 const SamplerConfig& config, const Params& init,
                 const LatentState& init_latent, std::uint64_t stream) {
  const DistanceMatrix dist = pairwise_distances(data.locations());
  GibbsSampler sampler(data, dist, hyper, config, init, init_latent,
                       RngState::substream(config.seed, stream));
  Chain chain;
  chain.config = config;
  chain.draws.reserve(config.kept_draws());
  for (std::int64_t i = 1; i <= config.n_iter; ++i) {
    try {
      sampler.step();
    } catch (const NumericError& e) {
      throw NumericError("sampler aborted at iteration " + std::to_string(i) + ": " +
                         e.what());
    }
    if (i > config.burn_in && (i - config.burn_in) % config.thin == 0)
      chain.draws.push_back({sampler.params(), sampler.latent()});
  }
  chain.accept = sampler.acceptance();
  chain.tuned_steps = sampler.steps();
  return chain;
}

}  // namespace

Chain run_chain(const SpatialDataset& data, const Hyperparams& hyper,
                const SamplerConfig& config, const Params& init,
                const LatentState& init_latent) {
  return run_single(data, hyper, config, init, init_latent, 0);
}

std::vector<Chain> run_chains(const SpatialDataset& data, const Hyperparams& hyper,
                              const SamplerConfig& config, const Params& init,
                              const LatentState& init_latent, int workers) {
  const int k = config.n_chains;
  std::vector<Chain> chains(k);
  std::vector<std::exception_ptr> errors(k);

  auto run_one = [&](int c) {
    try {
      chains[c] = run_single(data, hyper, config, init, init_latent,
                             static_cast<std::uint64_t>(c));
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };

  if (workers <= 1) {
    for (int c = 0; c < k; ++c) run_one(c);
  } else {
    for (int start = 0; start < k; start += workers) {
      std::vector<std::thread> pool;
      for (int c = start; c < std::min(k, start + workers); ++c)
        pool.emplace_back(run_one, c);
      for (auto& t : pool) t.join();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return chains;
}

}  // namespace spmem
