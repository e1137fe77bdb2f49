#pragma once

#include <string>

#include "spmem/mcmc.hpp"

namespace spmem {

struct PsrfResult {
  double value = 0;
  bool degenerate = false;  // zero within-chain variance
};

// Potential scale reduction factor sqrt(Vhat/W) over >= 2 equal-length
// scalar traces, Vhat = ((L-1)/L) W + B/L; whole chains, no split.
PsrfResult gelman_rubin(const std::vector<std::vector<double>>& traces);

struct Psrf {
  std::vector<std::string> names;
  std::vector<PsrfResult> results;
  double max_value() const;  // over non-degenerate entries
};

Psrf gelman_rubin_params(const std::vector<Chain>& chains);

// DIC = 2 mean(deviance) - deviance(posterior-mean eta) on the marginal
// likelihood; falls back to the conditional-likelihood deviance when the
// covariance at the posterior mean is not factorable.
double dic(const Chain& chain, const SpatialDataset& data, const DistanceMatrix& dist,
           bool* used_conditional_fallback = nullptr);

// Posterior-mean parameter vector, component-wise over the draws.
Params posterior_mean_params(const Chain& chain);

struct SensitivityReport {
  std::vector<std::string> names;
  std::vector<double> relative_change;  // |mean_alt - mean_bench| / sd_bench
  std::vector<bool> degenerate;         // sd_bench == 0
};

SensitivityReport relative_change(const Chain& benchmark, const Chain& alternative);

// Maximum relative change across the selected elements (MRE); selects by
// exact name or prefix, so "beta" covers every coefficient.
double max_relative_change(const SensitivityReport& report, const std::string& selector);

struct ParamSummary {
  std::string name;
  double mean = 0;
  double variance = 0;
  std::vector<double> quantiles;
};

std::vector<ParamSummary> summarize(const Chain& chain, const std::vector<double>& probs);

}  // namespace spmem
