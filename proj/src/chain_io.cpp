#include "spmem/chain_io.hpp"

#include "spmem/csv.hpp"

namespace spmem {

std::string latent_path_for(const std::string& params_csv) {
  const auto dot = params_csv.rfind(".csv");
  if (dot == std::string::npos || dot + 4 != params_csv.size())
    return params_csv + "_latent";
  return params_csv.substr(0, dot) + "_latent.csv";
}

void write_chain(const std::string& params_csv, const Chain& chain,
                 const SpatialDataset& data) {
  if (chain.draws.empty()) throw DataError("refusing to write an empty chain");
  const auto names = param_names(chain.draws[0].params);

  std::vector<std::string> header = {"iteration"};
  header.insert(header.end(), names.begin(), names.end());
  std::vector<std::vector<double>> rows;
  rows.reserve(chain.draws.size());
  for (std::size_t i = 0; i < chain.draws.size(); ++i) {
    const Vec v = param_vector(chain.draws[i].params);
    std::vector<double> row = {static_cast<double>(
        chain.config.burn_in + static_cast<std::int64_t>(i + 1) * chain.config.thin)};
    row.insert(row.end(), v.data(), v.data() + v.size());
    rows.push_back(std::move(row));
  }
  write_csv(params_csv, header, rows);

  std::vector<std::string> lheader = {"iteration"};
  for (int i = 0; i < data.n(); ++i) lheader.push_back("eps" + std::to_string(i));
  for (int j = 0; j < data.p(); ++j)
    if (data.error_mask()[j])
      for (int i = 0; i < data.n(); ++i)
        lheader.push_back("v" + std::to_string(j) + "_" + std::to_string(i));
  std::vector<std::vector<double>> lrows;
  lrows.reserve(chain.draws.size());
  for (std::size_t r = 0; r < chain.draws.size(); ++r) {
    const auto& latent = chain.draws[r].latent;
    std::vector<double> row = {rows[r][0]};
    row.insert(row.end(), latent.epsilon.data(), latent.epsilon.data() + data.n());
    for (int j = 0; j < data.p(); ++j)
      if (data.error_mask()[j])
        for (int i = 0; i < data.n(); ++i) row.push_back(latent.v(i, j));
    lrows.push_back(std::move(row));
  }
  write_csv(latent_path_for(params_csv), lheader, lrows);
}

Chain read_chain(const std::string& params_csv, const SpatialDataset& data) {
  const CsvTable params = read_csv(params_csv);
  const CsvTable latent = read_csv(latent_path_for(params_csv));
  if (params.rows.empty()) throw DataError(params_csv + ": chain file has no draws");
  if (latent.rows.size() != params.rows.size())
    throw DataError("chain and latent files disagree on draw count");

  const bool matern = params.column("theta2") >= 0;
  const int pdim = data.p();
  std::vector<int> beta_cols(pdim);
  for (int j = 0; j < pdim; ++j) {
    beta_cols[j] = params.column("beta" + std::to_string(j));
    if (beta_cols[j] < 0) throw DataError(params_csv + ": missing beta column");
  }
  const int cs = params.column("sigma2"), cw = params.column("omega2"),
            ct = params.column("tau2"), c1 = params.column("theta1"),
            c2 = params.column("theta2");
  if (cs < 0 || cw < 0 || ct < 0 || c1 < 0)
    throw DataError(params_csv + ": missing parameter columns");

  std::vector<int> eps_cols(data.n());
  for (int i = 0; i < data.n(); ++i) {
    eps_cols[i] = latent.column("eps" + std::to_string(i));
    if (eps_cols[i] < 0) throw DataError("latent file: missing eps columns");
  }
  std::vector<std::pair<int, std::vector<int>>> v_cols;
  for (int j = 0; j < data.p(); ++j)
    if (data.error_mask()[j]) {
      std::vector<int> cols(data.n());
      for (int i = 0; i < data.n(); ++i) {
        cols[i] = latent.column("v" + std::to_string(j) + "_" + std::to_string(i));
        if (cols[i] < 0) throw DataError("latent file: missing v columns");
      }
      v_cols.emplace_back(j, std::move(cols));
    }

  Chain chain;
  for (std::size_t r = 0; r < params.rows.size(); ++r) {
    Draw d;
    d.params.beta.resize(pdim);
    for (int j = 0; j < pdim; ++j) d.params.beta[j] = params.rows[r][beta_cols[j]];
    d.params.sigma2 = params.rows[r][cs];
    d.params.omega2 = params.rows[r][cw];
    d.params.tau2 = params.rows[r][ct];
    if (matern)
      d.params.kernel = MaternKernel{params.rows[r][c1], params.rows[r][c2]};
    else
      d.params.kernel = ExponentialKernel{params.rows[r][c1]};
    d.latent.epsilon.resize(data.n());
    for (int i = 0; i < data.n(); ++i) d.latent.epsilon[i] = latent.rows[r][eps_cols[i]];
    d.latent.v = Mat::Zero(data.n(), data.p());
    for (const auto& [j, cols] : v_cols)
      for (int i = 0; i < data.n(); ++i) d.latent.v(i, j) = latent.rows[r][cols[i]];
    chain.draws.push_back(std::move(d));
  }
  return chain;
}

}  // namespace spmem
