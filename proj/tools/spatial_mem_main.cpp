// spatial-mem: batch front end for the spatial measurement-error model.
// Subcommands: simulate, fit, predict, diagnose, sensitivity.
// Exit codes: 0 ok, 2 config error, 3 numeric failure, 4 convergence gate.

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "spmem/chain_io.hpp"
#include "spmem/config.hpp"
#include "spmem/csv.hpp"
#include "spmem/diagnostics.hpp"
#include "spmem/manifest.hpp"
#include "spmem/mcmc.hpp"
#include "spmem/prediction.hpp"
#include "spmem/simulation.hpp"

namespace fs = std::filesystem;
using namespace spmem;

namespace {

// stream tags so each pipeline stage owns an independent seed family
constexpr std::uint64_t kTagSimulate = 1;
constexpr std::uint64_t kTagInit = 2;
constexpr std::uint64_t kTagChains = 3;
constexpr std::uint64_t kTagPredict = 4;

struct CliOptions {
  std::string config_path;
  std::uint64_t seed_override = 0;
  bool has_seed_override = false;
  int chains_override = 0;
  bool force = false;
  int workers = 1;
  std::string chain_file;
  bool evaluate = false;
};

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

std::uint64_t effective_seed(const RunConfig& cfg, const CliOptions& opt) {
  return opt.has_seed_override ? opt.seed_override : cfg.sampler().seed;
}

SamplerConfig effective_sampler(const RunConfig& cfg, const CliOptions& opt) {
  SamplerConfig s = cfg.sampler();
  if (opt.has_seed_override) s.seed = opt.seed_override;
  if (opt.chains_override > 0) s.n_chains = opt.chains_override;
  return s;
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.out_dir());
  return (fs::path(cfg.out_dir()) / name).string();
}

void write_summary_csv(const std::string& path, const std::vector<ParamSummary>& rows) {
  std::vector<std::vector<double>> body;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "parameter,mean,variance,q05,q50,q95\n";
  for (const auto& r : rows) {
    out << r.name;
    out << ',' << format_double(r.mean) << ',' << format_double(r.variance);
    for (double q : r.quantiles) out << ',' << format_double(q);
    out << '\n';
  }
}

Chain pooled_chain(const std::vector<Chain>& chains) {
  Chain pooled = chains[0];
  for (std::size_t k = 1; k < chains.size(); ++k)
    pooled.draws.insert(pooled.draws.end(), chains[k].draws.begin(),
                        chains[k].draws.end());
  return pooled;
}

void collect_acceptance(RunManifest& manifest, const std::vector<Chain>& chains) {
  for (std::size_t k = 0; k < chains.size(); ++k) {
    const std::string prefix = "chain" + std::to_string(k + 1) + ".";
    manifest.acceptance_rates.emplace_back(prefix + "sigma2", chains[k].accept.sigma2.rate());
    manifest.acceptance_rates.emplace_back(prefix + "tau2", chains[k].accept.tau2.rate());
    manifest.acceptance_rates.emplace_back(prefix + "theta1", chains[k].accept.theta1.rate());
    if (chains[k].accept.theta2.attempts > 0)
      manifest.acceptance_rates.emplace_back(prefix + "theta2",
                                             chains[k].accept.theta2.rate());
  }
}

int cmd_simulate(const RunConfig& cfg, const CliOptions& opt) {
  Timer timer;
  const SimulateSection sim = cfg.simulate();
  const std::uint64_t seed = effective_seed(cfg, opt);
  RngState rng = RngState::substream(RngState::derive_seed(seed, kTagSimulate), 0);

  const SimulatedField field = simulate_field(sim.spec, rng);
  const HoldoutSplit split = holdout_split(field.data, sim.spec.holdout);
  const Contaminated cont = contaminate(split.train, sim.spec.tau, rng, sim.spec.me_sd);

  DatasetSchema schema = cfg.schema();
  if (schema.covariates.empty()) schema.covariates = {"mu1"};

  const std::string train_path = out_path(cfg, "train.csv");
  save_dataset(train_path, cont.observed, schema);

  RunManifest manifest;
  manifest.command = "simulate";
  manifest.config_path = cfg.path;
  manifest.config_text = cfg.ini.raw_text;
  manifest.seed = seed;
  manifest.output_files.push_back(train_path);

  if (split.test) {
    const std::string test_path = out_path(cfg, "test.csv");
    save_dataset(test_path, *split.test, schema);
    manifest.output_files.push_back(test_path);
  }

  const std::string truth_path = out_path(cfg, "truth.csv");
  {
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < cont.observed.n(); ++i)
      rows.push_back({cont.observed.locations()[i].x, cont.observed.locations()[i].y,
                      cont.truth.x[i], cont.truth.v[i], cont.truth.tau});
    write_csv(truth_path, {"x", "y", "x_true", "v", "tau"}, rows);
  }
  manifest.output_files.push_back(truth_path);

  manifest.wall_seconds = timer.seconds();
  write_manifest(out_path(cfg, "manifest_simulate.json"), manifest);
  std::cout << "simulate: wrote " << cont.observed.n() << " training rows"
            << (split.test ? " and " + std::to_string(split.test->n()) + " test rows" : "")
            << " to " << cfg.out_dir() << "\n";
  return 0;
}

int cmd_fit(const RunConfig& cfg, const CliOptions& opt) {
  Timer timer;
  const SpatialDataset data = load_dataset(cfg.train_path(), cfg.schema());
  const SamplerConfig sampler = effective_sampler(cfg, opt);
  const Hyperparams priors = cfg.priors();

  RngState init_rng = RngState::substream(RngState::derive_seed(sampler.seed, kTagInit), 0);
  auto [init_params, init_latent] =
      initial_state(cfg.init_values(), data, sampler.naive, init_rng);

  SamplerConfig run_cfg = sampler;
  run_cfg.seed = RngState::derive_seed(sampler.seed, kTagChains);
  const std::vector<Chain> chains =
      run_chains(data, priors, run_cfg, init_params, init_latent, opt.workers);

  RunManifest manifest;
  manifest.command = "fit";
  manifest.config_path = cfg.path;
  manifest.config_text = cfg.ini.raw_text;
  manifest.seed = sampler.seed;
  collect_acceptance(manifest, chains);

  for (std::size_t k = 0; k < chains.size(); ++k) {
    const std::string path = out_path(cfg, "chain_" + std::to_string(k + 1) + ".csv");
    write_chain(path, chains[k], data);
    manifest.output_files.push_back(path);
    manifest.output_files.push_back(latent_path_for(path));
  }

  bool gate_tripped = false;
  if (chains.size() >= 2) {
    const Psrf psrf = gelman_rubin_params(chains);
    const std::string psrf_path = out_path(cfg, "psrf.csv");
    std::ofstream out(psrf_path);
    out << "parameter,psrf\n";
    for (std::size_t i = 0; i < psrf.names.size(); ++i)
      out << psrf.names[i] << ','
          << (psrf.results[i].degenerate ? "degenerate"
                                         : format_double(psrf.results[i].value))
          << '\n';
    out.close();
    manifest.output_files.push_back(psrf_path);
    if (psrf.max_value() > cfg.psrf_threshold()) {
      gate_tripped = true;
      std::cerr << "warning: PSRF " << psrf.max_value() << " exceeds threshold "
                << cfg.psrf_threshold() << (opt.force ? " (--force given)" : "") << "\n";
    }
  }

  if (!gate_tripped || opt.force) {
    const Chain pooled = pooled_chain(chains);
    const std::string summary_path = out_path(cfg, "summary.csv");
    write_summary_csv(summary_path, summarize(pooled, {0.05, 0.5, 0.95}));
    manifest.output_files.push_back(summary_path);

    const DistanceMatrix dist = pairwise_distances(data.locations());
    bool fallback = false;
    const double dic_value = dic(pooled, data, dist, &fallback);
    const std::string dic_path = out_path(cfg, "dic.txt");
    std::ofstream out(dic_path);
    out << "DIC " << format_double(dic_value) << '\n';
    if (fallback) out << "note: conditional-likelihood deviance fallback used\n";
    out.close();
    manifest.output_files.push_back(dic_path);
    std::cout << "fit: DIC " << dic_value << "\n";
  }

  manifest.wall_seconds = timer.seconds();
  if (gate_tripped)
    manifest.notes.emplace_back("convergence", opt.force ? "gate exceeded, forced"
                                                         : "gate exceeded");
  write_manifest(out_path(cfg, "manifest_fit.json"), manifest);

  if (gate_tripped && !opt.force) {
    std::cerr << "summaries withheld: rerun with --force to write them anyway\n";
    return 4;
  }
  return 0;
}

CovariateProvider make_provider(const PredictSection& pred, const RunConfig& cfg,
                                const SpatialDataset& data) {
  if (pred.covariate_constant) {
    Vec constant = pred.constant_covariates;
    if (constant.size() == 0) constant = Vec::Zero(data.p() - 1);
    if (constant.size() != data.p() - 1)
      throw ConfigError("[predict] constant covariates must match covariate count");
    return [constant](const Location&) { return constant; };
  }
  // per-node covariate table; nodes must match exactly
  const CsvTable table = read_csv(pred.covariate_csv);
  const DatasetSchema schema = cfg.schema();
  const int cx = table.column(schema.x);
  const int cy = table.column(schema.y);
  if (cx < 0 || cy < 0)
    throw ConfigError(pred.covariate_csv + ": needs coordinate columns");
  std::vector<int> ccov;
  for (const auto& name : schema.covariates) {
    const int c = table.column(name);
    if (c < 0) throw ConfigError(pred.covariate_csv + ": missing column " + name);
    ccov.push_back(c);
  }
  auto grid_cov = std::make_shared<std::map<std::pair<double, double>, Vec>>();
  for (const auto& row : table.rows) {
    Vec v(static_cast<Eigen::Index>(ccov.size()));
    for (std::size_t k = 0; k < ccov.size(); ++k) v[static_cast<Eigen::Index>(k)] = row[ccov[k]];
    (*grid_cov)[{row[cx], row[cy]}] = std::move(v);
  }
  return [grid_cov, path = pred.covariate_csv](const Location& s) {
    auto it = grid_cov->find({s.x, s.y});
    if (it == grid_cov->end())
      throw ConfigError(path + ": no covariates for node (" + std::to_string(s.x) +
                        ", " + std::to_string(s.y) + ")");
    return it->second;
  };
}

void write_prediction_csv(const std::string& path, const PredictiveSummary& summary) {
  std::vector<std::vector<double>> rows;
  for (const auto& r : summary.rows) {
    std::vector<double> row = {r.loc.x, r.loc.y, r.mean, r.sd};
    row.insert(row.end(), r.quantiles.begin(), r.quantiles.end());
    rows.push_back(std::move(row));
  }
  write_csv(path, {"x", "y", "mean", "sd", "q05", "q50", "q95"}, rows);
}

int cmd_predict(const RunConfig& cfg, const CliOptions& opt) {
  Timer timer;
  const SpatialDataset data = load_dataset(cfg.train_path(), cfg.schema());
  const std::string chain_file =
      opt.chain_file.empty() ? out_path(cfg, "chain_1.csv") : opt.chain_file;
  const Chain chain = read_chain(chain_file, data);
  const PredictSection pred = cfg.predict();
  const std::uint64_t seed = effective_seed(cfg, opt);
  const std::uint64_t predict_seed = RngState::derive_seed(seed, kTagPredict);

  RunManifest manifest;
  manifest.command = "predict";
  manifest.config_path = cfg.path;
  manifest.config_text = cfg.ini.raw_text;
  manifest.seed = seed;

  bool produced = false;
  if (pred.grid) {
    const auto provider = make_provider(pred, cfg, data);
    const PredictiveSummary grid =
        predict_grid(chain, data, *pred.grid, provider, predict_seed, opt.workers);
    const std::string grid_path = out_path(cfg, "grid.csv");
    write_prediction_csv(grid_path, grid);
    manifest.output_files.push_back(grid_path);
    produced = true;
  }

  if (!pred.points_csv.empty()) {
    const CsvTable table = read_csv(pred.points_csv);
    const DatasetSchema schema = cfg.schema();
    const int cx = table.column(schema.x);
    const int cy = table.column(schema.y);
    if (cx < 0 || cy < 0) throw ConfigError(pred.points_csv + ": needs coordinate columns");
    PredictionRequest req;
    req.new_mu.resize(static_cast<Eigen::Index>(table.rows.size()), data.p());
    std::vector<int> ccov;
    for (const auto& name : schema.covariates) {
      const int c = table.column(name);
      if (c < 0) throw ConfigError(pred.points_csv + ": missing column " + name);
      ccov.push_back(c);
    }
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      req.new_locations.push_back({table.rows[i][cx], table.rows[i][cy]});
      req.new_mu(static_cast<Eigen::Index>(i), 0) = 1.0;
      for (std::size_t k = 0; k < ccov.size(); ++k)
        req.new_mu(static_cast<Eigen::Index>(i), 1 + static_cast<Eigen::Index>(k)) =
            table.rows[i][ccov[k]];
    }
    const PredictiveSummary points = predict_at(chain, data, req, predict_seed, opt.workers);
    const std::string points_path = out_path(cfg, "points.csv");
    write_prediction_csv(points_path, points);
    manifest.output_files.push_back(points_path);
    produced = true;
  }

  if (opt.evaluate) {
    if (cfg.test_path().empty()) throw ConfigError("--evaluate needs [data] test");
    const SpatialDataset test = load_dataset(cfg.test_path(), cfg.schema());
    PredictionRequest req;
    req.new_locations = test.locations();
    req.new_mu = test.mu();
    const PredictiveSummary eval = predict_at(chain, data, req, predict_seed, opt.workers);
    double sq = 0;
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < test.n(); ++i) {
      const double err = eval.rows[i].mean - test.y()[i];
      sq += err * err;
      rows.push_back({test.locations()[i].x, test.locations()[i].y, test.y()[i],
                      eval.rows[i].mean, eval.rows[i].sd});
    }
    const double rmse = std::sqrt(sq / test.n());
    const std::string eval_path = out_path(cfg, "evaluation.csv");
    write_csv(eval_path, {"x", "y", "observed", "mean", "sd"}, rows);
    const std::string report_path = out_path(cfg, "evaluation.txt");
    std::ofstream out(report_path);
    out << "RMSE " << format_double(rmse) << " over " << test.n() << " hold-out points\n";
    out.close();
    manifest.output_files.push_back(eval_path);
    manifest.output_files.push_back(report_path);
    std::cout << "predict: hold-out RMSE " << rmse << "\n";
    produced = true;
  }

  if (!produced)
    throw ConfigError("predict: nothing to do (no [predict] grid/points, no --evaluate)");

  manifest.wall_seconds = timer.seconds();
  write_manifest(out_path(cfg, "manifest_predict.json"), manifest);
  return 0;
}

int cmd_diagnose(const RunConfig& cfg, const CliOptions& opt) {
  Timer timer;
  const SpatialDataset data = load_dataset(cfg.train_path(), cfg.schema());
  const SamplerConfig sampler = effective_sampler(cfg, opt);

  std::vector<Chain> chains;
  for (int k = 1; k <= sampler.n_chains; ++k)
    chains.push_back(read_chain(out_path(cfg, "chain_" + std::to_string(k) + ".csv"), data));

  RunManifest manifest;
  manifest.command = "diagnose";
  manifest.config_path = cfg.path;
  manifest.config_text = cfg.ini.raw_text;
  manifest.seed = sampler.seed;

  if (chains.size() >= 2) {
    const Psrf psrf = gelman_rubin_params(chains);
    const std::string psrf_path = out_path(cfg, "psrf.csv");
    std::ofstream out(psrf_path);
    out << "parameter,psrf\n";
    for (std::size_t i = 0; i < psrf.names.size(); ++i)
      out << psrf.names[i] << ','
          << (psrf.results[i].degenerate ? "degenerate"
                                         : format_double(psrf.results[i].value))
          << '\n';
    out.close();
    manifest.output_files.push_back(psrf_path);
  }

  const Chain pooled = pooled_chain(chains);
  const std::string summary_path = out_path(cfg, "summary.csv");
  write_summary_csv(summary_path, summarize(pooled, {0.05, 0.5, 0.95}));
  manifest.output_files.push_back(summary_path);

  const DistanceMatrix dist = pairwise_distances(data.locations());
  bool fallback = false;
  const double dic_value = dic(pooled, data, dist, &fallback);
  const std::string dic_path = out_path(cfg, "dic.txt");
  std::ofstream out(dic_path);
  out << "DIC " << format_double(dic_value) << '\n';
  if (fallback) out << "note: conditional-likelihood deviance fallback used\n";
  out.close();
  manifest.output_files.push_back(dic_path);

  manifest.wall_seconds = timer.seconds();
  write_manifest(out_path(cfg, "manifest_diagnose.json"), manifest);
  std::cout << "diagnose: DIC " << dic_value << "\n";
  return 0;
}

// prior constant -> parameter whose prior it controls
std::string focus_of(const SensitivityAlt& alt) {
  if (!alt.is_prior) {
    std::string focus = alt.overrides.front().first;
    if (focus.rfind("beta", 0) == 0) return focus;
    if (focus == "latent_var") return "";  // affects everything; report overall
    return focus;
  }
  static const std::map<std::string, std::string> prior_focus = {
      {"c1", "beta"},   {"c2", "sigma2"}, {"c3", "sigma2"}, {"c4", "omega2"},
      {"c5", "omega2"}, {"gamma", "omega2"}, {"c6", "tau2"}, {"c7", "tau2"},
      {"c8", "theta1"}, {"c9", "theta2"}};
  auto it = prior_focus.find(alt.overrides.front().first);
  return it == prior_focus.end() ? "" : it->second;
}

int cmd_sensitivity(const RunConfig& cfg, const CliOptions& opt) {
  Timer timer;
  const SpatialDataset data = load_dataset(cfg.train_path(), cfg.schema());
  const SamplerConfig sampler = effective_sampler(cfg, opt);
  const Hyperparams priors = cfg.priors();
  const InitValues init = cfg.init_values();
  const auto alts = cfg.sensitivity_alts();
  if (alts.empty()) throw ConfigError("[sensitivity] needs at least one alt line");

  SamplerConfig run_cfg = sampler;
  run_cfg.seed = RngState::derive_seed(sampler.seed, kTagChains);

  auto fit_once = [&](const Hyperparams& h, const InitValues& iv) {
    RngState init_rng =
        RngState::substream(RngState::derive_seed(sampler.seed, kTagInit), 0);
    auto [p0, s0] = initial_state(iv, data, sampler.naive, init_rng);
    return pooled_chain(run_chains(data, h, run_cfg, p0, s0, opt.workers));
  };

  std::cout << "sensitivity: benchmark fit\n";
  const Chain benchmark = fit_once(priors, init);

  struct Row {
    std::string label, focus;
    double mre;
    SensitivityReport report;
  };
  std::vector<Row> prior_rows, init_rows;
  for (const auto& alt : alts) {
    std::cout << "sensitivity: refit with " << alt.label << "\n";
    const Chain alternative = alt.is_prior
                                  ? fit_once(apply_prior_overrides(priors, alt), init)
                                  : fit_once(priors, apply_init_overrides(init, alt));
    SensitivityReport report = relative_change(benchmark, alternative);
    std::string focus = focus_of(alt);
    double mre;
    if (focus.empty()) {
      mre = 0;
      for (std::size_t i = 0; i < report.names.size(); ++i)
        if (!report.degenerate[i]) mre = std::max(mre, report.relative_change[i]);
    } else {
      mre = max_relative_change(report, focus);
    }
    (alt.is_prior ? prior_rows : init_rows)
        .push_back({alt.label, focus.empty() ? "all" : focus, mre, std::move(report)});
  }

  RunManifest manifest;
  manifest.command = "sensitivity";
  manifest.config_path = cfg.path;
  manifest.config_text = cfg.ini.raw_text;
  manifest.seed = sampler.seed;

  auto emit = [&](const std::vector<Row>& rows, const std::string& stem) {
    if (rows.empty()) return;
    const std::string csv_path = out_path(cfg, stem + ".csv");
    std::ofstream csv(csv_path);
    csv << "alternative,parameter,mre";
    for (const auto& name : rows[0].report.names) csv << ",rc_" << name;
    csv << '\n';
    for (const auto& row : rows) {
      csv << '"' << row.label << "\"," << row.focus << ',' << format_double(row.mre);
      for (std::size_t i = 0; i < row.report.names.size(); ++i)
        csv << ','
            << (row.report.degenerate[i] ? "nan"
                                         : format_double(row.report.relative_change[i]));
      csv << '\n';
    }
    csv.close();
    manifest.output_files.push_back(csv_path);

    const std::string txt_path = out_path(cfg, stem + ".txt");
    std::ofstream txt(txt_path);
    txt << "parameter    alternative                      MRE\n";
    for (const auto& row : rows) {
      txt << row.focus;
      for (std::size_t i = row.focus.size(); i < 13; ++i) txt << ' ';
      txt << row.label;
      for (std::size_t i = row.label.size(); i < 33; ++i) txt << ' ';
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.4f", row.mre);
      txt << buf << '\n';
    }
    txt.close();
    manifest.output_files.push_back(txt_path);
  };
  emit(prior_rows, "sensitivity_priors");
  emit(init_rows, "sensitivity_inits");

  manifest.wall_seconds = timer.seconds();
  write_manifest(out_path(cfg, "manifest_sensitivity.json"), manifest);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian spatial regression with covariate measurement error"};
  app.require_subcommand(1);

  CliOptions opt;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "configuration file")->required();
    sub->add_option("--seed", opt.seed_override, "override the configured seed")
        ->each([&](const std::string&) { opt.has_seed_override = true; });
    sub->add_option("--chains", opt.chains_override, "override the chain count");
    sub->add_option("--workers", opt.workers, "worker threads for chains/prediction");
    sub->add_flag("--force", opt.force, "write summaries even past the PSRF gate");
  };

  CLI::App* simulate = app.add_subcommand("simulate", "generate synthetic datasets");
  add_common(simulate);
  CLI::App* fit = app.add_subcommand("fit", "run the sampler");
  add_common(fit);
  CLI::App* predict = app.add_subcommand("predict", "sample the predictive distribution");
  add_common(predict);
  predict->add_option("--chain", opt.chain_file, "chain file (default out/chain_1.csv)");
  predict->add_flag("--evaluate", opt.evaluate, "compare predictions to held-out data");
  CLI::App* diagnose = app.add_subcommand("diagnose", "summaries, PSRF and DIC");
  add_common(diagnose);
  CLI::App* sensitivity =
      app.add_subcommand("sensitivity", "prior and initial-value perturbation study");
  add_common(sensitivity);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const RunConfig cfg = load_run_config(opt.config_path);
    if (simulate->parsed()) return cmd_simulate(cfg, opt);
    if (fit->parsed()) return cmd_fit(cfg, opt);
    if (predict->parsed()) return cmd_predict(cfg, opt);
    if (diagnose->parsed()) return cmd_diagnose(cfg, opt);
    if (sensitivity->parsed()) return cmd_sensitivity(cfg, opt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
