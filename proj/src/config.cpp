#include "spmem/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "spmem/csv.hpp"

namespace spmem {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  // comma or whitespace separated
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

double parse_double(const std::string& text, const std::string& what) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw ConfigError("cannot parse number for " + what + ": '" + text + "'");
  return v;
}

bool IniFile::has_section(const std::string& section) const {
  for (const auto& e : entries)
    if (e.section == section) return true;
  return false;
}

std::optional<std::string> IniFile::get(const std::string& section,
                                        const std::string& key) const {
  std::optional<std::string> out;
  for (const auto& e : entries)
    if (e.section == section && e.key == key) out = e.value;
  return out;
}

std::vector<std::string> IniFile::get_all(const std::string& section,
                                          const std::string& key) const {
  std::vector<std::string> out;
  for (const auto& e : entries)
    if (e.section == section && e.key == key) out.push_back(e.value);
  return out;
}

std::string IniFile::require(const std::string& section, const std::string& key) const {
  auto v = get(section, key);
  if (!v) throw ConfigError("missing [" + section + "] " + key);
  return *v;
}

double IniFile::require_double(const std::string& section, const std::string& key) const {
  return parse_double(require(section, key), "[" + section + "] " + key);
}

double IniFile::get_double(const std::string& section, const std::string& key,
                           double fallback) const {
  auto v = get(section, key);
  return v ? parse_double(*v, "[" + section + "] " + key) : fallback;
}

std::int64_t IniFile::get_int(const std::string& section, const std::string& key,
                              std::int64_t fallback) const {
  auto v = get(section, key);
  if (!v) return fallback;
  std::int64_t out = 0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc{} || ptr != v->data() + v->size())
    throw ConfigError("cannot parse integer [" + section + "] " + key + ": '" + *v + "'");
  return out;
}

bool IniFile::get_bool(const std::string& section, const std::string& key,
                       bool fallback) const {
  auto v = get(section, key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw ConfigError("cannot parse boolean [" + section + "] " + key + ": '" + *v + "'");
}

IniFile parse_ini(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  IniFile ini;
  std::string line, section;
  std::size_t line_no = 0;
  std::ostringstream raw;
  while (std::getline(in, line)) {
    ++line_no;
    raw << line << '\n';
    if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(path + ":" + std::to_string(line_no) + ": malformed section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
    ini.entries.push_back({section, key, value});
  }
  ini.raw_text = raw.str();
  return ini;
}

RunConfig load_run_config(const std::string& path) {
  return RunConfig{parse_ini(path), path};
}

std::string RunConfig::out_dir() const {
  return ini.get("output", "dir").value_or(".");
}

DatasetSchema RunConfig::schema() const {
  DatasetSchema s;
  s.x = ini.get("data", "x").value_or("x");
  s.y = ini.get("data", "y").value_or("y");
  s.response = ini.get("data", "response").value_or("resp");
  if (auto cov = ini.get("data", "covariates")) s.covariates = split_list(*cov);
  if (auto ep = ini.get("data", "error_prone")) s.error_prone = split_list(*ep);
  return s;
}

std::string RunConfig::train_path() const { return ini.require("data", "train"); }

std::string RunConfig::test_path() const { return ini.get("data", "test").value_or(""); }

Hyperparams RunConfig::priors() const {
  Hyperparams h;
  h.c1 = ini.get_double("priors", "c1", h.c1);
  h.c2 = ini.get_double("priors", "c2", h.c2);
  h.c3 = ini.get_double("priors", "c3", h.c3);
  h.c4 = ini.get_double("priors", "c4", h.c4);
  h.c5 = ini.get_double("priors", "c5", h.c5);
  h.c6 = ini.get_double("priors", "c6", h.c6);
  h.c7 = ini.get_double("priors", "c7", h.c7);
  h.c8 = ini.get_double("priors", "c8", h.c8);
  h.c9 = ini.get_double("priors", "c9", h.c9);
  h.gamma_gig = ini.get_double("priors", "gamma", h.gamma_gig);
  h.validate();
  return h;
}

SamplerConfig RunConfig::sampler() const {
  SamplerConfig c;
  c.n_iter = ini.get_int("sampler", "n_iter", c.n_iter);
  c.burn_in = ini.get_int("sampler", "burn_in", c.burn_in);
  c.thin = ini.get_int("sampler", "thin", c.thin);
  c.n_chains = static_cast<int>(ini.get_int("sampler", "chains", c.n_chains));
  const std::string seed_text = ini.require("sampler", "seed");
  std::uint64_t seed = 0;
  auto [ptr, ec] = std::from_chars(seed_text.data(), seed_text.data() + seed_text.size(), seed);
  if (ec != std::errc{} || ptr != seed_text.data() + seed_text.size())
    throw ConfigError("cannot parse [sampler] seed: '" + seed_text + "'");
  c.seed = seed;
  c.steps.sigma2 = ini.get_double("sampler", "step_sigma2", c.steps.sigma2);
  c.steps.tau2 = ini.get_double("sampler", "step_tau2", c.steps.tau2);
  c.steps.theta1 = ini.get_double("sampler", "step_theta1", c.steps.theta1);
  c.steps.theta2 = ini.get_double("sampler", "step_theta2", c.steps.theta2);
  c.adapt = ini.get_bool("sampler", "adapt", c.adapt);
  const std::string model = ini.get("sampler", "model").value_or("mem");
  if (model == "mem")
    c.naive = false;
  else if (model == "naive")
    c.naive = true;
  else
    throw ConfigError("[sampler] model must be 'mem' or 'naive', got '" + model + "'");
  const std::string vu = ini.get("sampler", "v_update").value_or("exact");
  if (vu == "exact")
    c.v_update = VUpdate::exact;
  else if (vu == "minimum_norm")
    c.v_update = VUpdate::minimum_norm;
  else
    throw ConfigError("[sampler] v_update must be 'exact' or 'minimum_norm'");
  c.validate();
  return c;
}

double RunConfig::psrf_threshold() const {
  return ini.get_double("sampler", "psrf_threshold", 1.1);
}

InitValues RunConfig::init_values() const {
  InitValues v;
  if (auto b = ini.get("init", "beta")) {
    const auto parts = split_ws(*b);
    v.beta.resize(static_cast<Eigen::Index>(parts.size()));
    for (std::size_t i = 0; i < parts.size(); ++i)
      v.beta[static_cast<Eigen::Index>(i)] = parse_double(parts[i], "[init] beta");
  }
  v.sigma2 = ini.get_double("init", "sigma2", v.sigma2);
  v.omega2 = ini.get_double("init", "omega2", v.omega2);
  v.tau2 = ini.get_double("init", "tau2", v.tau2);
  v.latent_var = ini.get_double("init", "latent_var", v.latent_var);
  const std::string kind = ini.get("kernel", "type").value_or("exponential");
  const double theta1 = ini.get_double("init", "theta1", 5.0);
  if (kind == "exponential")
    v.kernel = ExponentialKernel{theta1};
  else if (kind == "matern")
    v.kernel = MaternKernel{theta1, ini.get_double("init", "theta2", 0.5)};
  else
    throw ConfigError("[kernel] type must be 'exponential' or 'matern'");
  return v;
}

SimulateSection RunConfig::simulate() const {
  SimulateSection s;
  SimSpec& spec = s.spec;
  const std::string locations = ini.get("simulate", "locations").value_or("builtin");
  if (locations == "builtin") {
    spec.locations = builtin_sites();
  } else {
    s.locations_csv = locations;
    CsvTable t = read_csv(locations);
    const int cx = t.column(ini.get("simulate", "x").value_or("x"));
    const int cy = t.column(ini.get("simulate", "y").value_or("y"));
    if (cx < 0 || cy < 0) throw ConfigError(locations + ": needs x and y columns");
    for (const auto& row : t.rows) spec.locations.push_back({row[cx], row[cy]});
  }
  spec.beta0 = ini.get_double("simulate", "beta0", spec.beta0);
  spec.beta1 = ini.get_double("simulate", "beta1", spec.beta1);
  spec.sigma2 = ini.get_double("simulate", "sigma2", spec.sigma2);
  spec.omega2 = ini.get_double("simulate", "omega2", spec.omega2);
  spec.cov_mean = ini.get_double("simulate", "cov_mean", spec.cov_mean);
  spec.cov_var = ini.get_double("simulate", "cov_var", spec.cov_var);
  spec.tau = ini.get_double("simulate", "tau", spec.tau);
  const std::string kind = ini.get("simulate", "kernel").value_or("exponential");
  if (kind == "exponential")
    spec.kernel = ExponentialKernel{ini.get_double("simulate", "theta1", 1.2)};
  else if (kind == "matern")
    spec.kernel = MaternKernel{ini.get_double("simulate", "theta1", 1.2),
                               ini.get_double("simulate", "theta2", 0.5)};
  else
    throw ConfigError("[simulate] kernel must be 'exponential' or 'matern'");
  const std::string scale = ini.get("simulate", "me_scale").value_or("unit");
  if (scale == "unit")
    spec.me_sd = 1.0;
  else if (scale == "sigma_tau")
    spec.me_sd = std::sqrt(spec.sigma2) * spec.tau;
  else
    throw ConfigError("[simulate] me_scale must be 'unit' or 'sigma_tau'");
  const std::string holdout = ini.get("simulate", "holdout").value_or("builtin");
  if (holdout == "builtin") {
    s.holdout_builtin = true;
    spec.holdout = builtin_holdout();
  } else if (holdout == "none") {
    s.holdout_builtin = false;
  } else {
    s.holdout_builtin = false;
    CsvTable t = read_csv(holdout);
    const int cx = t.column("x"), cy = t.column("y");
    if (cx < 0 || cy < 0) throw ConfigError(holdout + ": needs x and y columns");
    for (const auto& row : t.rows) spec.holdout.push_back({row[cx], row[cy]});
  }
  spec.validate();
  return s;
}

PredictSection RunConfig::predict() const {
  PredictSection p;
  if (auto g = ini.get("predict", "grid")) {
    const auto parts = split_ws(*g);
    if (parts.size() != 6)
      throw ConfigError("[predict] grid needs: x_min x_max y_min y_max nx ny");
    GridSpec grid;
    grid.x_min = parse_double(parts[0], "grid x_min");
    grid.x_max = parse_double(parts[1], "grid x_max");
    grid.y_min = parse_double(parts[2], "grid y_min");
    grid.y_max = parse_double(parts[3], "grid y_max");
    grid.nx = static_cast<int>(parse_double(parts[4], "grid nx"));
    grid.ny = static_cast<int>(parse_double(parts[5], "grid ny"));
    p.grid = grid;
  }
  if (auto c = ini.get("predict", "covariates")) {
    const auto parts = split_ws(*c);
    if (parts.empty()) throw ConfigError("[predict] covariates is empty");
    if (parts[0] == "constant") {
      p.covariate_constant = true;
      p.constant_covariates.resize(static_cast<Eigen::Index>(parts.size()) - 1);
      for (std::size_t i = 1; i < parts.size(); ++i)
        p.constant_covariates[static_cast<Eigen::Index>(i - 1)] =
            parse_double(parts[i], "[predict] covariates");
    } else if (parts[0] == "csv" && parts.size() == 2) {
      p.covariate_constant = false;
      p.covariate_csv = parts[1];
    } else {
      throw ConfigError("[predict] covariates must be 'constant v1 ...' or 'csv <path>'");
    }
  }
  p.points_csv = ini.get("predict", "points").value_or("");
  return p;
}

std::vector<SensitivityAlt> RunConfig::sensitivity_alts() const {
  std::vector<SensitivityAlt> out;
  for (const auto& line : ini.get_all("sensitivity", "alt")) {
    const auto parts = split_ws(line);
    if (parts.size() < 2 || (parts[0] != "prior" && parts[0] != "init"))
      throw ConfigError("[sensitivity] alt must start with 'prior' or 'init': " + line);
    SensitivityAlt alt;
    alt.is_prior = parts[0] == "prior";
    alt.label = line;
    for (std::size_t i = 1; i < parts.size(); ++i) {
      const auto eq = parts[i].find('=');
      if (eq == std::string::npos)
        throw ConfigError("[sensitivity] alt entries must be name=value: " + parts[i]);
      alt.overrides.emplace_back(parts[i].substr(0, eq),
                                 parse_double(parts[i].substr(eq + 1), parts[i]));
    }
    out.push_back(std::move(alt));
  }
  return out;
}

std::pair<Params, LatentState> initial_state(const InitValues& init,
                                             const SpatialDataset& data, bool naive,
                                             RngState& rng) {
  Params p;
  p.beta = init.beta.size() ? init.beta : Vec::Zero(data.p());
  if (p.beta.size() != data.p())
    throw ConfigError("initial beta length does not match covariate count");
  p.sigma2 = init.sigma2;
  p.omega2 = init.omega2;
  p.tau2 = naive ? 0.0 : init.tau2;
  p.kernel = init.kernel;
  p.validate(naive);

  LatentState s;
  const double sd = std::sqrt(init.latent_var);
  s.epsilon = Vec::Zero(data.n());
  for (int i = 0; i < data.n(); ++i) s.epsilon[i] = sd * rng.normal();
  s.v = Mat::Zero(data.n(), data.p());
  if (!naive)
    for (int j = 0; j < data.p(); ++j)
      if (data.error_mask()[j])
        for (int i = 0; i < data.n(); ++i) s.v(i, j) = sd * rng.normal();
  return {std::move(p), std::move(s)};
}

namespace {

void apply_override(Hyperparams& h, const std::string& name, double value) {
  if (name == "c1")
    h.c1 = value;
  else if (name == "c2")
    h.c2 = value;
  else if (name == "c3")
    h.c3 = value;
  else if (name == "c4")
    h.c4 = value;
  else if (name == "c5")
    h.c5 = value;
  else if (name == "c6")
    h.c6 = value;
  else if (name == "c7")
    h.c7 = value;
  else if (name == "c8")
    h.c8 = value;
  else if (name == "c9")
    h.c9 = value;
  else if (name == "gamma")
    h.gamma_gig = value;
  else
    throw ConfigError("unknown prior hyperparameter '" + name + "'");
}

}  // namespace

Hyperparams apply_prior_overrides(const Hyperparams& h, const SensitivityAlt& alt) {
  Hyperparams out = h;
  for (const auto& [name, value] : alt.overrides) apply_override(out, name, value);
  out.validate();
  return out;
}

InitValues apply_init_overrides(const InitValues& v, const SensitivityAlt& alt) {
  InitValues out = v;
  for (const auto& [name, value] : alt.overrides) {
    if (name == "sigma2")
      out.sigma2 = value;
    else if (name == "omega2")
      out.omega2 = value;
    else if (name == "tau2")
      out.tau2 = value;
    else if (name == "theta1" || name == "theta2") {
      if (auto* e = std::get_if<ExponentialKernel>(&out.kernel)) {
        if (name == "theta2") throw ConfigError("exponential kernel has no theta2");
        e->theta = value;
      } else {
        auto& m = std::get<MaternKernel>(out.kernel);
        (name == "theta1" ? m.theta1 : m.theta2) = value;
      }
    } else if (name == "latent_var")
      out.latent_var = value;
    else if (name.rfind("beta", 0) == 0) {
      const int idx = std::stoi(name.substr(4));
      if (out.beta.size() <= idx) throw ConfigError("init override beyond beta length");
      out.beta[idx] = value;
    } else
      throw ConfigError("unknown initial-value name '" + name + "'");
  }
  return out;
}

}  // namespace spmem
