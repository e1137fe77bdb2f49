#include "spmem/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "spmem/stats.hpp"

namespace spmem {

PsrfResult gelman_rubin(const std::vector<std::vector<double>>& traces) {
  const auto k = traces.size();
  if (k < 2) throw ConfigError("gelman_rubin needs at least 2 chains");
  const auto len = traces[0].size();
  if (len < 10) throw ConfigError("gelman_rubin needs chains of length >= 10");
  for (const auto& t : traces)
    if (t.size() != len) throw ConfigError("gelman_rubin chains must have equal length");

  const double kk = static_cast<double>(k);
  const double ll = static_cast<double>(len);
  std::vector<double> means(k), vars(k);
  for (std::size_t c = 0; c < k; ++c) {
    means[c] = mean_of(traces[c]);
    vars[c] = sample_variance(traces[c]);
  }
  const double grand = mean_of(means);
  double b = 0;
  for (double m : means) b += (m - grand) * (m - grand);
  b *= ll / (kk - 1.0);
  const double w = mean_of(vars);
  if (w == 0.0) return {std::numeric_limits<double>::quiet_NaN(), true};
  const double vhat = (ll - 1.0) / ll * w + b / ll;
  return {std::sqrt(vhat / w), false};
}

double Psrf::max_value() const {
  double m = 0;
  for (const auto& r : results)
    if (!r.degenerate) m = std::max(m, r.value);
  return m;
}

Psrf gelman_rubin_params(const std::vector<Chain>& chains) {
  if (chains.size() < 2) throw ConfigError("need at least 2 chains");
  Psrf out;
  out.names = param_names(chains[0].draws.at(0).params);
  for (std::size_t i = 0; i < out.names.size(); ++i) {
    std::vector<std::vector<double>> traces;
    for (const auto& c : chains) traces.push_back(chain_trace(c, static_cast<int>(i)));
    out.results.push_back(gelman_rubin(traces));
  }
  return out;
}

Params posterior_mean_params(const Chain& chain) {
  if (chain.draws.empty()) throw ConfigError("empty chain");
  Params mean = chain.draws[0].params;
  Vec acc = Vec::Zero(param_vector(mean).size());
  for (const auto& d : chain.draws) acc += param_vector(d.params);
  acc /= static_cast<double>(chain.draws.size());
  const auto pd = mean.beta.size();
  mean.beta = acc.head(pd);
  mean.sigma2 = acc[pd];
  mean.omega2 = acc[pd + 1];
  mean.tau2 = acc[pd + 2];
  if (is_matern(mean.kernel))
    mean.kernel = MaternKernel{acc[pd + 3], acc[pd + 4]};
  else
    mean.kernel = ExponentialKernel{acc[pd + 3]};
  return mean;
}

namespace {

LatentState posterior_mean_latent(const Chain& chain) {
  LatentState mean = chain.draws[0].latent;
  mean.epsilon.setZero();
  mean.v.setZero();
  for (const auto& d : chain.draws) {
    mean.epsilon += d.latent.epsilon;
    mean.v += d.latent.v;
  }
  mean.epsilon /= static_cast<double>(chain.draws.size());
  mean.v /= static_cast<double>(chain.draws.size());
  return mean;
}

}  // namespace

double dic(const Chain& chain, const SpatialDataset& data, const DistanceMatrix& dist,
           bool* used_conditional_fallback) {
  if (chain.draws.empty()) throw ConfigError("dic needs a non-empty chain");
  if (used_conditional_fallback) *used_conditional_fallback = false;

  const Params mean = posterior_mean_params(chain);
  try {
    std::vector<double> deviances;
    deviances.reserve(chain.draws.size());
    for (const auto& d : chain.draws)
      deviances.push_back(-2.0 * marginal_loglik(d.params, data, dist));
    const double dhat = -2.0 * marginal_loglik(mean, data, dist);
    return 2.0 * mean_of(deviances) - dhat;
  } catch (const NumericError&) {
    if (used_conditional_fallback) *used_conditional_fallback = true;
    std::vector<double> deviances;
    deviances.reserve(chain.draws.size());
    for (const auto& d : chain.draws)
      deviances.push_back(-2.0 * conditional_loglik(d.params, d.latent, data));
    const double dhat =
        -2.0 * conditional_loglik(mean, posterior_mean_latent(chain), data);
    return 2.0 * mean_of(deviances) - dhat;
  }
}

SensitivityReport relative_change(const Chain& benchmark, const Chain& alternative) {
  if (benchmark.draws.empty() || alternative.draws.empty())
    throw ConfigError("relative_change needs non-empty chains");
  SensitivityReport out;
  out.names = param_names(benchmark.draws[0].params);
  for (std::size_t i = 0; i < out.names.size(); ++i) {
    const auto bench = chain_trace(benchmark, static_cast<int>(i));
    const auto alt = chain_trace(alternative, static_cast<int>(i));
    const double sd = std::sqrt(sample_variance(bench));
    if (sd == 0.0) {
      out.relative_change.push_back(std::numeric_limits<double>::quiet_NaN());
      out.degenerate.push_back(true);
    } else {
      out.relative_change.push_back(std::abs(mean_of(alt) - mean_of(bench)) / sd);
      out.degenerate.push_back(false);
    }
  }
  return out;
}

double max_relative_change(const SensitivityReport& report, const std::string& selector) {
  double m = 0;
  bool any = false;
  for (std::size_t i = 0; i < report.names.size(); ++i) {
    if (report.names[i].rfind(selector, 0) != 0) continue;
    any = true;
    if (!report.degenerate[i]) m = std::max(m, report.relative_change[i]);
  }
  if (!any) throw ConfigError("no parameter matches selector '" + selector + "'");
  return m;
}

std::vector<ParamSummary> summarize(const Chain& chain,
                                    const std::vector<double>& probs) {
  if (chain.draws.empty()) throw ConfigError("summarize needs a non-empty chain");
  std::vector<ParamSummary> out;
  const auto names = param_names(chain.draws[0].params);
  for (std::size_t i = 0; i < names.size(); ++i) {
    auto trace = chain_trace(chain, static_cast<int>(i));
    ParamSummary s;
    s.name = names[i];
    s.mean = mean_of(trace);
    s.variance = sample_variance(trace);
    std::sort(trace.begin(), trace.end());
    for (double prob : probs) s.quantiles.push_back(quantile_type7_sorted(trace, prob));
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace spmem
