#include "spmem/prediction.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "spmem/stats.hpp"

namespace spmem {

ConditionalMoments predictive_moments(const Params& p,
                                      const std::vector<Location>& sites,
                                      const SpdFactor& cond_chol,
                                      const Vec& resid_solve, const Location& s0,
                                      const Vec& mu0, const Vec& v0) {
  const auto n = static_cast<Eigen::Index>(sites.size());
  Vec r(n);
  for (Eigen::Index i = 0; i < n; ++i) r[i] = kernel_corr(distance(s0, sites[i]), p.kernel);

  const double sigma_tau = std::sqrt(p.sigma2 * p.tau2);
  ConditionalMoments out;
  out.mean = mu0.dot(p.beta) + sigma_tau * v0.dot(p.beta) + r.dot(resid_solve);
  out.var = p.sigma2 * (1.0 + p.omega2 - cond_chol.solve_lower(r).squaredNorm());
  if (!(out.var > 0))
    throw NumericError("non-positive predictive variance; site may coincide with data");
  return out;
}

PredictiveSummary predict_at(const Chain& chain, const SpatialDataset& data,
                             const PredictionRequest& req, std::uint64_t seed,
                             int workers) {
  const auto m = static_cast<Eigen::Index>(req.new_locations.size());
  if (chain.draws.empty()) throw DataError("prediction needs a non-empty chain");
  if (m < 1) throw ConfigError("prediction needs at least one location");
  if (req.new_mu.rows() != m || req.new_mu.cols() != data.p())
    throw ConfigError("new covariate matrix must be m x p with the intercept");
  for (Eigen::Index j = 0; j < m; ++j)
    for (const auto& s : data.locations())
      if (distance(req.new_locations[j], s) == 0.0)
        throw DataError("prediction site " + std::to_string(j) +
                        " coincides with a data location");
  for (double prob : req.probs)
    if (!(prob >= 0) || !(prob <= 1)) throw ConfigError("quantile probs must be in [0,1]");

  const auto n_draws = static_cast<std::int64_t>(chain.draws.size());
  const DistanceMatrix dist = pairwise_distances(data.locations());
  const auto& mask = data.error_mask();

  // y0[d*m + j]: draw d's predictive sample at site j
  std::vector<double> y0(static_cast<std::size_t>(n_draws) * m);

  auto run_draw = [&](std::int64_t d) {
    const Draw& draw = chain.draws[d];
    RngState rng = RngState::substream(seed, static_cast<std::uint64_t>(d));
    Mat noisy = build_corr_matrix(dist, draw.params.kernel);
    noisy.diagonal().array() += draw.params.omega2;
    const SpdFactor chol = SpdFactor::compute(noisy);
    const double sigma_tau = std::sqrt(draw.params.sigma2 * draw.params.tau2);
    const Vec resid = data.y() - data.mu() * draw.params.beta -
                      sigma_tau * (draw.latent.v * draw.params.beta);
    const Vec resid_solve = chol.solve(resid);

    Vec v0 = Vec::Zero(data.p());
    for (Eigen::Index j = 0; j < m; ++j) {
      for (int k = 0; k < data.p(); ++k) v0[k] = mask[k] ? rng.normal() : 0.0;
      const auto mom = predictive_moments(draw.params, data.locations(), chol,
                                          resid_solve, req.new_locations[j],
                                          req.new_mu.row(j).transpose(), v0);
      y0[static_cast<std::size_t>(d) * m + j] = rng.normal(mom.mean, std::sqrt(mom.var));
    }
  };

  if (workers <= 1) {
    for (std::int64_t d = 0; d < n_draws; ++d) run_draw(d);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::int64_t d = w; d < n_draws; d += workers) run_draw(d);
      });
    for (auto& t : pool) t.join();
  }

  PredictiveSummary out;
  out.probs = req.probs;
  out.n_draws = n_draws;
  out.rows.resize(m);
  std::vector<double> samples(n_draws);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (std::int64_t d = 0; d < n_draws; ++d)
      samples[d] = y0[static_cast<std::size_t>(d) * m + j];
    const double mean = kahan_sum(samples) / static_cast<double>(n_draws);
    std::vector<double> sq(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
      sq[i] = (samples[i] - mean) * (samples[i] - mean);
    const double var =
        n_draws > 1 ? kahan_sum(sq) / static_cast<double>(n_draws - 1) : 0.0;
    LocationSummary& row = out.rows[j];
    row.loc = req.new_locations[j];
    row.mean = mean;
    row.sd = std::sqrt(var);
    std::vector<double> sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    for (double prob : req.probs)
      row.quantiles.push_back(quantile_type7_sorted(sorted, prob));
  }
  return out;
}

PredictiveSummary predict_grid(const Chain& chain, const SpatialDataset& data,
                               const GridSpec& grid, const CovariateProvider& cov,
                               std::uint64_t seed, int workers) {
  if (grid.nx < 2 || grid.ny < 2)
    throw ConfigError("grid resolution must be at least 2 per axis");
  if (!(grid.x_max > grid.x_min) || !(grid.y_max > grid.y_min))
    throw ConfigError("grid ranges must be increasing");

  PredictionRequest req;
  const double dx = (grid.x_max - grid.x_min) / (grid.nx - 1);
  const double dy = (grid.y_max - grid.y_min) / (grid.ny - 1);
  req.new_mu.resize(static_cast<Eigen::Index>(grid.nx) * grid.ny, data.p());
  Eigen::Index row = 0;
  for (int iy = 0; iy < grid.ny; ++iy)
    for (int ix = 0; ix < grid.nx; ++ix, ++row) {
      const Location node{grid.x_min + ix * dx, grid.y_min + iy * dy};
      req.new_locations.push_back(node);
      const Vec c = cov(node);
      if (c.size() != data.p() - 1)
        throw ConfigError("covariate provider returned wrong dimension");
      req.new_mu(row, 0) = 1.0;
      req.new_mu.row(row).tail(data.p() - 1) = c.transpose();
    }
  return predict_at(chain, data, req, seed, workers);
}

}  // namespace spmem
