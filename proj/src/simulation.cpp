#include "spmem/simulation.hpp"

#include <cmath>

namespace spmem {

void SimSpec::validate() const {
  if (locations.size() < 2) throw ConfigError("simulation needs at least 2 locations");
  if (!(sigma2 >= 0) || !(omega2 > 0) || !(cov_var > 0) || !(tau >= 0) || !(me_sd >= 0))
    throw ConfigError("simulation: variances must be positive");
  validate_kernel(kernel);
  for (const auto& h : holdout) {
    bool found = false;
    for (const auto& s : locations)
      if (s.x == h.x && s.y == h.y) {
        found = true;
        break;
      }
    if (!found)
      throw ConfigError("hold-out location (" + std::to_string(h.x) + ", " +
                        std::to_string(h.y) + ") is not among the sites");
  }
}

SimulatedField simulate_field(const SimSpec& spec, RngState& rng) {
  spec.validate();
  const auto n = static_cast<Eigen::Index>(spec.locations.size());

  Vec x(n);
  const double cov_sd = std::sqrt(spec.cov_var);
  for (Eigen::Index i = 0; i < n; ++i) x[i] = rng.normal(spec.cov_mean, cov_sd);

  const DistanceMatrix dist = pairwise_distances(spec.locations);
  const SpdFactor chol = SpdFactor::compute(build_corr_matrix(dist, spec.kernel));
  const Vec epsilon = chol.lower() * rng.normal_vec(static_cast<int>(n));
  const Vec rho = rng.normal_vec(static_cast<int>(n));

  const double sigma = std::sqrt(spec.sigma2);
  const double nugget_sd = sigma * std::sqrt(spec.omega2);
  const Vec y = (spec.beta0 + spec.beta1 * x.array() + sigma * epsilon.array() +
                 nugget_sd * rho.array())
                    .matrix();

  Mat mu(n, 2);
  mu.col(0).setOnes();
  mu.col(1) = x;
  SpatialDataset data(spec.locations, y, std::move(mu), {false, false});
  return {std::move(data), epsilon, rho};
}

Contaminated contaminate(const SpatialDataset& with_true_x, double tau, RngState& rng,
                         double me_sd) {
  if (with_true_x.p() != 2)
    throw ConfigError("contaminate expects a single-covariate dataset");
  if (!(tau >= 0) || !(me_sd >= 0))
    throw ConfigError("contaminate: tau and the error scale must be nonnegative");
  const int n = with_true_x.n();

  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = me_sd * rng.normal();

  Mat mu = with_true_x.mu();
  SimTruth truth{mu.col(1), v, tau};
  mu.col(1) -= v;
  SpatialDataset observed(with_true_x.locations(), with_true_x.y(), std::move(mu),
                          {false, true});
  return {std::move(observed), std::move(truth)};
}

HoldoutSplit holdout_split(const SpatialDataset& data,
                           const std::vector<Location>& holdout) {
  const int n = data.n();
  std::vector<bool> in_test(n, false);
  for (const auto& h : holdout) {
    bool found = false;
    for (int i = 0; i < n; ++i)
      if (data.locations()[i].x == h.x && data.locations()[i].y == h.y) {
        in_test[i] = true;
        found = true;
        break;
      }
    if (!found)
      throw DataError("hold-out location (" + std::to_string(h.x) + ", " +
                      std::to_string(h.y) + ") not present in the dataset");
  }

  auto take = [&](bool test_part) -> std::optional<SpatialDataset> {
    std::vector<Location> locations;
    std::vector<Eigen::Index> idx;
    for (int i = 0; i < n; ++i)
      if (in_test[i] == test_part) {
        locations.push_back(data.locations()[i]);
        idx.push_back(i);
      }
    if (idx.empty()) return std::nullopt;
    Vec y(idx.size());
    Mat mu(idx.size(), data.p());
    for (std::size_t r = 0; r < idx.size(); ++r) {
      y[r] = data.y()[idx[r]];
      mu.row(r) = data.mu().row(idx[r]);
    }
    return SpatialDataset(std::move(locations), std::move(y), std::move(mu),
                          data.error_mask());
  };

  auto train = take(false);
  if (!train) throw DataError("hold-out covers the whole dataset");
  return {std::move(*train), take(true)};
}

namespace {

// 97 pseudo-regular sites: a 10x10 grid with 5-unit spacing (first 97 cells
// in row-major order), each coordinate jittered by U(-1.75, 1.75) from a
// fixed stream. Generated once; the constants below freeze the layout.
std::vector<Location> make_grid_sites() {
  RngState rng(0x5173'0108ull);
  std::vector<Location> sites;
  sites.reserve(97);
  for (int row = 0; row < 10 && sites.size() < 97; ++row)
    for (int col = 0; col < 10 && sites.size() < 97; ++col) {
      const double jx = 3.5 * rng.uniform() - 1.75;
      const double jy = 3.5 * rng.uniform() - 1.75;
      sites.push_back({2.5 + 5.0 * col + jx, 2.5 + 5.0 * row + jy});
    }
  return sites;
}

const std::vector<Location> kHoldout = {
    {14.143578, 8.449528},  {13.610791, 17.782726}, {9.004231, 24.223948},
    {8.507509, 37.369297},  {18.034563, 27.378832}, {24.829648, 20.148889},
    {22.677188, 38.815286}, {33.783750, 39.866913}, {33.151787, 23.054762},
    {43.535390, 36.435227}, {38.923097, 13.050401}};

}  // namespace

const std::vector<Location>& builtin_sites() {
  static const std::vector<Location> sites = [] {
    std::vector<Location> all = make_grid_sites();
    all.insert(all.end(), kHoldout.begin(), kHoldout.end());
    return all;
  }();
  return sites;
}

const std::vector<Location>& builtin_holdout() { return kHoldout; }

}  // namespace spmem
