#include "spmem/data_model.hpp"

#include <algorithm>
#include <cmath>

#include "spmem/csv.hpp"

namespace spmem {

double distance(const Location& a, const Location& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

SpatialDataset::SpatialDataset(std::vector<Location> locations, Vec y, Mat mu,
                               std::vector<bool> error_mask)
    : locations_(std::move(locations)),
      y_(std::move(y)),
      mu_(std::move(mu)),
      error_mask_(std::move(error_mask)) {
  const auto n = static_cast<Eigen::Index>(locations_.size());
  if (n < 2) throw DataError("dataset needs at least 2 observations");
  if (y_.size() != n || mu_.rows() != n)
    throw DataError("locations, response and covariates disagree on n");
  if (mu_.cols() < 1 || static_cast<Eigen::Index>(error_mask_.size()) != mu_.cols())
    throw DataError("error mask length must equal covariate column count");
  if (error_mask_[0]) throw DataError("intercept column cannot be error-prone");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (mu_(i, 0) != 1.0)
      throw DataError("column 0 of the covariate matrix must be all ones");
    if (!std::isfinite(locations_[i].x) || !std::isfinite(locations_[i].y))
      throw DataError("non-finite coordinate at row " + std::to_string(i));
  }
  if (!y_.allFinite() || !mu_.allFinite())
    throw DataError("non-finite value in response or covariates");
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (distance(locations_[i], locations_[j]) == 0.0)
        throw DataError("duplicate location at rows " + std::to_string(i) + " and " +
                        std::to_string(j));
}

int SpatialDataset::n_error_prone() const {
  return static_cast<int>(std::count(error_mask_.begin(), error_mask_.end(), true));
}

DistanceMatrix::DistanceMatrix(Mat d) : d_(std::move(d)) {
  const auto n = d_.rows();
  if (n < 1 || d_.cols() != n) throw DataError("distance matrix must be square");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (d_(i, i) != 0.0) throw DataError("distance matrix diagonal must be zero");
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (d_(i, j) != d_(j, i)) throw DataError("distance matrix must be symmetric");
      if (!(d_(i, j) > 0.0)) throw DataError("off-diagonal distances must be positive");
    }
  }
}

SpatialDataset load_dataset(const std::string& path, const DatasetSchema& schema) {
  CsvTable table = read_csv(path);

  auto require = [&](const std::string& name) {
    int j = table.column(name);
    if (j < 0) throw DataError(path + ": missing column '" + name + "'");
    return j;
  };
  const int cx = require(schema.x);
  const int cy = require(schema.y);
  const int cr = require(schema.response);
  std::vector<int> ccov;
  for (const auto& name : schema.covariates) ccov.push_back(require(name));
  for (const auto& name : schema.error_prone)
    if (std::find(schema.covariates.begin(), schema.covariates.end(), name) ==
        schema.covariates.end())
      throw DataError("error-prone column '" + name + "' not among covariates");

  const auto n = static_cast<Eigen::Index>(table.rows.size());
  if (n < 2) throw DataError(path + ": need at least 2 data rows");

  std::vector<Location> locations(n);
  Vec y(n);
  Mat mu(n, 1 + static_cast<Eigen::Index>(ccov.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = table.rows[i];
    locations[i] = {row[cx], row[cy]};
    y[i] = row[cr];
    mu(i, 0) = 1.0;
    for (std::size_t k = 0; k < ccov.size(); ++k) mu(i, 1 + k) = row[ccov[k]];
  }
  std::vector<bool> mask(1 + ccov.size(), false);
  for (std::size_t k = 0; k < schema.covariates.size(); ++k)
    if (std::find(schema.error_prone.begin(), schema.error_prone.end(),
                  schema.covariates[k]) != schema.error_prone.end())
      mask[1 + k] = true;

  return SpatialDataset(std::move(locations), std::move(y), std::move(mu),
                        std::move(mask));
}

void save_dataset(const std::string& path, const SpatialDataset& data,
                  const DatasetSchema& schema) {
  if (static_cast<int>(schema.covariates.size()) != data.p() - 1)
    throw DataError("schema covariate count does not match dataset");
  std::vector<std::string> header = {schema.x, schema.y, schema.response};
  header.insert(header.end(), schema.covariates.begin(), schema.covariates.end());
  std::vector<std::vector<double>> rows(data.n());
  for (int i = 0; i < data.n(); ++i) {
    rows[i] = {data.locations()[i].x, data.locations()[i].y, data.y()[i]};
    for (int j = 1; j < data.p(); ++j) rows[i].push_back(data.mu()(i, j));
  }
  write_csv(path, header, rows);
}

DistanceMatrix pairwise_distances(const std::vector<Location>& locations) {
  const auto n = static_cast<Eigen::Index>(locations.size());
  if (n < 2) throw DataError("need at least 2 locations");
  Mat d = Mat::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      d(i, j) = distance(locations[i], locations[j]);
      d(j, i) = d(i, j);
    }
  return DistanceMatrix(std::move(d));
}

double median_distance(const DistanceMatrix& d) {
  const int n = d.n();
  if (n < 2) throw DataError("median distance needs at least 2 locations");
  std::vector<double> all;
  all.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) all.push_back(d(i, j));
  std::sort(all.begin(), all.end());
  const std::size_t m = all.size();
  if (m % 2 == 1) return all[m / 2];
  return 0.5 * (all[m / 2 - 1] + all[m / 2]);
}

}  // namespace spmem
