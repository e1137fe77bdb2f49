#pragma once

#include <cstdint>
#include <random>

#include "spmem/correlation.hpp"
#include "spmem/data_model.hpp"

namespace spmem {

// Deterministic 64-bit generator: the same seed and call sequence produce
// the same stream on every platform, so no standard-library distribution
// objects are used anywhere.
class RngState {
 public:
  explicit RngState(std::uint64_t seed) : engine_(seed) {}

  // Independent stream derived from a master seed (one per chain/worker).
  static RngState substream(std::uint64_t master_seed, std::uint64_t stream);

  // Derived seed for a distinct purpose (simulation, fitting, prediction)
  // so their substream families never collide.
  static std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t tag);

  std::uint64_t next_u64() { return engine_(); }

  double uniform();  // strictly inside (0,1)
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  Vec normal_vec(int n);
  double exponential(double rate);
  double gamma(double shape, double rate);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0;
  bool has_spare_ = false;
};

// Modified Bessel function of the third kind K_nu(x); symmetric in nu.
double bessel_k(double nu, double x);
double log_bessel_k(double nu, double x);

// Generalized inverse-Gaussian on (0, inf):
//   f(x) ~ x^{gamma-1} exp(-(a^2/x + b^2 x)/2),
// normalizer (b/a)^gamma / (2 K_gamma(a b)).
struct GigParams {
  double gamma = 0;
  double a = 1;  // multiplies 1/x
  double b = 1;  // multiplies x
  void validate() const;
};

double gig_logpdf(double x, const GigParams& p);
double sample_gig(const GigParams& p, RngState& rng);

// E[X] = (a/b) K_{gamma+1}(ab) / K_gamma(ab)
double gig_mean(const GigParams& p);

// Exact multivariate normal draws from a factored covariance or precision.
Vec sample_mvn_cov(const Vec& mean, const SpdFactor& cov, RngState& rng);
Vec sample_mvn_prec(const Vec& mean, const SpdFactor& prec, RngState& rng);

}  // namespace spmem
