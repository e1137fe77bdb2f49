#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spmem/data_model.hpp"
#include "spmem/mcmc.hpp"
#include "spmem/prediction.hpp"
#include "spmem/simulation.hpp"

namespace spmem {

// Sectioned key-value configuration text. Keys may repeat within a
// section; single-value lookups take the last occurrence.
struct IniFile {
  struct Entry {
    std::string section;
    std::string key;
    std::string value;
  };
  std::vector<Entry> entries;
  std::string raw_text;

  bool has_section(const std::string& section) const;
  std::optional<std::string> get(const std::string& section, const std::string& key) const;
  std::vector<std::string> get_all(const std::string& section, const std::string& key) const;

  std::string require(const std::string& section, const std::string& key) const;
  double require_double(const std::string& section, const std::string& key) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& section, const std::string& key,
                       std::int64_t fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
};

IniFile parse_ini(const std::string& path);
double parse_double(const std::string& text, const std::string& what);

struct InitValues {
  Vec beta;
  double sigma2 = 2.8;
  double omega2 = 3.0;
  double tau2 = 0.1;
  double latent_var = 0.31;  // variance of the latent-field starting draws
  KernelSpec kernel = ExponentialKernel{5.0};
};

struct SensitivityAlt {
  bool is_prior = true;  // false: initial-value perturbation
  std::vector<std::pair<std::string, double>> overrides;
  std::string label;
};

struct PredictSection {
  std::optional<GridSpec> grid;
  bool covariate_constant = true;
  Vec constant_covariates;      // without intercept
  std::string covariate_csv;    // per-node covariates when not constant
  std::string points_csv;       // optional point-prediction sites
};

struct SimulateSection {
  SimSpec spec;                // locations resolved at parse time
  bool holdout_builtin = true;
  std::string locations_csv;
};

// Typed view over one configuration file; sections are parsed lazily so a
// command only requires what it uses.
struct RunConfig {
  IniFile ini;
  std::string path;

  std::string out_dir() const;
  DatasetSchema schema() const;
  std::string train_path() const;
  std::string test_path() const;  // may be empty
  Hyperparams priors() const;
  SamplerConfig sampler() const;  // includes seed (mandatory) and model variant
  double psrf_threshold() const;
  InitValues init_values() const;
  SimulateSection simulate() const;
  PredictSection predict() const;
  std::vector<SensitivityAlt> sensitivity_alts() const;
};

RunConfig load_run_config(const std::string& path);

// Builds the sampler's starting state from configured values: the latent
// fields start as N(0, latent_var) draws in every active slot.
std::pair<Params, LatentState> initial_state(const InitValues& init,
                                             const SpatialDataset& data, bool naive,
                                             RngState& rng);

// Applies prior/init overrides such as {"c1", 13} or {"sigma2", 0.5}.
Hyperparams apply_prior_overrides(const Hyperparams& h, const SensitivityAlt& alt);
InitValues apply_init_overrides(const InitValues& v, const SensitivityAlt& alt);

}  // namespace spmem
