#pragma once

#include <optional>

#include "spmem/mcmc.hpp"
#include "spmem/model_core.hpp"

namespace spmem {

// Settings for the synthetic-data generator. Locations must be resolved
// (built-in layout or user file) before calling simulate_field.
struct SimSpec {
  std::vector<Location> locations;
  double beta0 = 0.5;
  double beta1 = 2.0;
  double sigma2 = 1.0;
  double omega2 = 1.1;
  KernelSpec kernel = ExponentialKernel{1.2};
  double cov_mean = 3.0;
  double cov_var = 0.2;
  double tau = 0.31622776601683794;  // sqrt(0.1)
  // Standard deviation of the subtracted measurement error; 1 keeps the
  // surrogate at x - v with v ~ N(0,1).
  double me_sd = 1.0;
  std::vector<Location> holdout;

  void validate() const;
};

struct SimulatedField {
  SpatialDataset data;  // covariate column holds the true x, no error mask
  Vec epsilon;
  Vec rho;
};

// Hidden ground truth emitted next to the observed data; never consumed by
// any fitting path.
struct SimTruth {
  Vec x;
  Vec v;  // subtracted error, so observed = x - v exactly
  double tau = 0;
};

struct Contaminated {
  SpatialDataset observed;
  SimTruth truth;
};

struct HoldoutSplit {
  SpatialDataset train;
  std::optional<SpatialDataset> test;  // empty hold-out gives nullopt
};

// Draws x ~ N(mean, var) per site, the spatial field from the kernel and
// white noise, then y = beta0 + beta1 x + sigma eps + sigma omega rho.
SimulatedField simulate_field(const SimSpec& spec, RngState& rng);

// Replaces the covariate with x - me_sd * v, v ~ N(0,1) i.i.d., marks the
// column error-prone and records the truth.
Contaminated contaminate(const SpatialDataset& with_true_x, double tau, RngState& rng,
                         double me_sd = 1.0);

HoldoutSplit holdout_split(const SpatialDataset& data,
                           const std::vector<Location>& holdout);

// Frozen 108-site layout: 97 jittered-grid sites on [0,50]^2 plus the 11
// fixed validation sites.
const std::vector<Location>& builtin_sites();
const std::vector<Location>& builtin_holdout();

}  // namespace spmem
