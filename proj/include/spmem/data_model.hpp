#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "spmem/errors.hpp"

namespace spmem {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct Location {
  double x = 0;
  double y = 0;
};

double distance(const Location& a, const Location& b);

// Column names used to pull a dataset out of a CSV file.
struct DatasetSchema {
  std::string x = "x";
  std::string y = "y";
  std::string response = "resp";
  std::vector<std::string> covariates;   // without the intercept
  std::vector<std::string> error_prone;  // subset of covariates
};

// Immutable spatial regression dataset. The covariate matrix carries the
// intercept as column 0; error_mask marks columns observed with measurement
// error (never the intercept).
class SpatialDataset {
 public:
  SpatialDataset(std::vector<Location> locations, Vec y, Mat mu,
                 std::vector<bool> error_mask);

  int n() const { return static_cast<int>(y_.size()); }
  int p() const { return static_cast<int>(mu_.cols()); }
  const std::vector<Location>& locations() const { return locations_; }
  const Vec& y() const { return y_; }
  const Mat& mu() const { return mu_; }
  const std::vector<bool>& error_mask() const { return error_mask_; }
  int n_error_prone() const;

 private:
  std::vector<Location> locations_;
  Vec y_;
  Mat mu_;
  std::vector<bool> error_mask_;
};

// Symmetric Euclidean distance matrix with zero diagonal.
class DistanceMatrix {
 public:
  explicit DistanceMatrix(Mat d);

  int n() const { return static_cast<int>(d_.rows()); }
  const Mat& d() const { return d_; }
  double operator()(int i, int j) const { return d_(i, j); }

 private:
  Mat d_;
};

SpatialDataset load_dataset(const std::string& path, const DatasetSchema& schema);
void save_dataset(const std::string& path, const SpatialDataset& data,
                  const DatasetSchema& schema);

DistanceMatrix pairwise_distances(const std::vector<Location>& locations);

// Median of the n(n-1)/2 distinct pairwise distances; even counts average
// the two central order statistics.
double median_distance(const DistanceMatrix& d);

}  // namespace spmem
