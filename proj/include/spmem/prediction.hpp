#pragma once

#include <functional>

#include "spmem/mcmc.hpp"

namespace spmem {

struct PredictionRequest {
  std::vector<Location> new_locations;
  Mat new_mu;  // m x p, intercept included
  std::vector<double> probs = {0.05, 0.5, 0.95};
};

struct LocationSummary {
  Location loc;
  double mean = 0;
  double sd = 0;
  std::vector<double> quantiles;
};

struct PredictiveSummary {
  std::vector<LocationSummary> rows;
  std::vector<double> probs;
  std::int64_t n_draws = 0;
};

struct GridSpec {
  double x_min = 0, x_max = 50;
  double y_min = 0, y_max = 50;
  int nx = 2, ny = 2;
};

// Covariates (without intercept) at an arbitrary grid node.
using CovariateProvider = std::function<Vec(const Location&)>;

struct ConditionalMoments {
  double mean = 0;
  double var = 0;
};

// One draw's conditional at a new site, exact under the joint law of
// (y0, y) given the draw, whose covariance is sigma^2 [C* + omega^2 I]:
//   mean = mu0'beta + sigma tau v0'beta + r'M^{-1}(y - mu beta - sigma tau V beta)
//   var  = sigma^2 [(1 + omega^2) - r'M^{-1} r],   M = C + omega^2 I.
// cond_chol must factor M and resid_solve must hold M^{-1}(y - ...).
ConditionalMoments predictive_moments(const Params& p,
                                      const std::vector<Location>& sites,
                                      const SpdFactor& cond_chol,
                                      const Vec& resid_solve, const Location& s0,
                                      const Vec& mu0, const Vec& v0);

// Composition sampling over the stored draws: fresh V0 per draw and site,
// then one normal draw from the conditional. Workers parallelize over
// draws; every draw owns a substream so results do not depend on
// scheduling.
PredictiveSummary predict_at(const Chain& chain, const SpatialDataset& data,
                             const PredictionRequest& req, std::uint64_t seed,
                             int workers = 1);

// Row-major (y outer, x inner) grid of predictive summaries.
PredictiveSummary predict_grid(const Chain& chain, const SpatialDataset& data,
                               const GridSpec& grid, const CovariateProvider& cov,
                               std::uint64_t seed, int workers = 1);

}  // namespace spmem
