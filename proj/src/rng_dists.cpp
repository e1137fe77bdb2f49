#include "spmem/rng_dists.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_sf_bessel.h>

#include <cmath>
#include <numbers>

#include "spmem/errors.hpp"

namespace spmem {

namespace {

// GSL must not abort the process on under/overflow; statuses are checked
// at every call site instead.
const int kGslHandlerOff = [] {
  gsl_set_error_handler_off();
  return 0;
}();

std::uint64_t splitmix64(std::uint64_t& s) {
  s += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

RngState RngState::substream(std::uint64_t master_seed, std::uint64_t stream) {
  std::uint64_t s = master_seed;
  std::uint64_t mixed = splitmix64(s);
  s = mixed ^ (0xA0761D6478BD642Full * (stream + 1));
  return RngState(splitmix64(s));
}

std::uint64_t RngState::derive_seed(std::uint64_t master_seed, std::uint64_t tag) {
  std::uint64_t s = master_seed ^ (0xE7037ED1A0B428DBull * (tag + 1));
  splitmix64(s);
  return splitmix64(s);
}

double RngState::uniform() {
  // 53-bit mantissa, offset by half an ulp so 0 and 1 are never returned
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double RngState::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(t);
  has_spare_ = true;
  return r * std::cos(t);
}

Vec RngState::normal_vec(int n) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = normal();
  return v;
}

double RngState::exponential(double rate) {
  if (!(rate > 0)) throw NumericError("exponential: rate must be positive");
  return -std::log(uniform()) / rate;
}

double RngState::gamma(double shape, double rate) {
  if (!(shape > 0) || !(rate > 0))
    throw NumericError("gamma: shape and rate must be positive");
  if (shape < 1.0) {
    // boost to shape+1, then scale back (Marsaglia & Tsang)
    const double g = gamma(shape + 1.0, rate);
    return g * std::pow(uniform(), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
  }
}

double bessel_k(double nu, double x) {
  if (!(x > 0)) throw NumericError("bessel_k: argument must be positive");
  gsl_sf_result res;
  const int status = gsl_sf_bessel_Knu_e(std::abs(nu), x, &res);
  if (status == GSL_EUNDRFLW) return 0.0;
  if (status != GSL_SUCCESS && status != GSL_ELOSS)
    throw NumericError("bessel_k failed for nu=" + std::to_string(nu) +
                       ", x=" + std::to_string(x));
  return res.val;
}

double log_bessel_k(double nu, double x) {
  if (!(x > 0)) throw NumericError("log_bessel_k: argument must be positive");
  gsl_sf_result res;
  const int status = gsl_sf_bessel_lnKnu_e(std::abs(nu), x, &res);
  if (status == GSL_EUNDRFLW) return -std::numeric_limits<double>::infinity();
  if (status != GSL_SUCCESS && status != GSL_ELOSS)
    throw NumericError("log_bessel_k failed for nu=" + std::to_string(nu) +
                       ", x=" + std::to_string(x));
  return res.val;
}

void GigParams::validate() const {
  if (!(a > 0) || !(b > 0) || !std::isfinite(a) || !std::isfinite(b) ||
      !std::isfinite(gamma))
    throw NumericError("gig: a and b must be positive and gamma finite");
}

double gig_logpdf(double x, const GigParams& p) {
  p.validate();
  if (!(x > 0)) throw NumericError("gig_logpdf: support is (0, inf)");
  return p.gamma * std::log(p.b / p.a) + (p.gamma - 1.0) * std::log(x) -
         std::numbers::ln2 - log_bessel_k(p.gamma, p.a * p.b) -
         0.5 * (p.a * p.a / x + p.b * p.b * x);
}

double gig_mean(const GigParams& p) {
  p.validate();
  const double w = p.a * p.b;
  return (p.a / p.b) *
         std::exp(log_bessel_k(p.gamma + 1.0, w) - log_bessel_k(p.gamma, w));
}

namespace {

// The samplers below work on the two-parameter standard form
//   g(z) ~ z^{lam-1} exp(-w (z + 1/z) / 2),  lam >= 0, w > 0,
// following Hormann & Leydold (2014). A GIG(gamma, a, b) draw is
// (a/b) * Z with lam = gamma, w = a*b; negative orders invert first.

double gig_mode(double lam, double w) {
  if (lam >= 1.0) return (std::sqrt((lam - 1.0) * (lam - 1.0) + w * w) + (lam - 1.0)) / w;
  return w / (std::sqrt((1.0 - lam) * (1.0 - lam) + w * w) + (1.0 - lam));
}

double log_kernel(double z, double lam, double w) {
  return (lam - 1.0) * std::log(z) - 0.5 * w * (z + 1.0 / z);
}

// Ratio-of-uniforms on the rectangle (0,u+] x (0,1]; efficient for
// moderate lam and w.
double gig_rou_noshift(double lam, double w, RngState& rng) {
  const double m = gig_mode(lam, w);
  const double lgm = log_kernel(m, lam, w);
  // argmax of z^2 g(z) is the mode of the kernel with lam+2
  const double xp = (std::sqrt((lam + 1.0) * (lam + 1.0) + w * w) + (lam + 1.0)) / w;
  const double ub = xp * std::exp(0.5 * (log_kernel(xp, lam, w) - lgm));
  for (;;) {
    const double u = ub * rng.uniform();
    const double v = rng.uniform();
    const double z = u / v;
    if (2.0 * std::log(v) <= log_kernel(z, lam, w) - lgm) return z;
  }
}

// Ratio-of-uniforms with the region shifted to the mode; the rectangle
// bounds come from the real roots of a cubic. Efficient for large lam or w.
double gig_rou_shift(double lam, double w, RngState& rng) {
  const double m = gig_mode(lam, w);
  const double lgm = log_kernel(m, lam, w);

  // stationary points of (z-m)^2 g(z): z^3 + a2 z^2 + a1 z + a0 = 0
  const double a2 = -(2.0 * (lam + 1.0) / w + m);
  const double a1 = 2.0 * (lam - 1.0) * m / w - 1.0;
  const double a0 = m;
  const double pp = a1 - a2 * a2 / 3.0;
  const double qq = 2.0 * a2 * a2 * a2 / 27.0 - a2 * a1 / 3.0 + a0;
  double cosarg = -qq / (2.0 * std::sqrt(-pp * pp * pp / 27.0));
  cosarg = std::clamp(cosarg, -1.0, 1.0);
  const double fi = std::acos(cosarg);
  const double fak = 2.0 * std::sqrt(-pp / 3.0);
  const double y1 = fak * std::cos(fi / 3.0) - a2 / 3.0;                       // > m
  const double y2 = fak * std::cos(fi / 3.0 + 4.0 * std::numbers::pi / 3.0) - a2 / 3.0;  // in (0,m)

  const double uplus = (y1 - m) * std::exp(0.5 * (log_kernel(y1, lam, w) - lgm));
  const double uminus = (y2 - m) * std::exp(0.5 * (log_kernel(y2, lam, w) - lgm));

  for (;;) {
    const double u = uminus + (uplus - uminus) * rng.uniform();
    const double v = rng.uniform();
    const double z = m + u / v;
    if (z <= 0.0) continue;
    if (2.0 * std::log(v) <= log_kernel(z, lam, w) - lgm) return z;
  }
}

// Rejection from a three-piece envelope (constant, power, exponential);
// covers 0 <= lam < 1 with small w where ratio-of-uniforms degenerates.
double gig_three_part(double lam, double w, RngState& rng) {
  const double m = gig_mode(lam, w);
  const double x0 = w / (1.0 - lam);

  const double k0 = std::exp(log_kernel(m, lam, w));  // constant piece height
  const double area0 = k0 * x0;

  double k1 = 0, area1 = 0, k2 = 0, area2 = 0;
  if (x0 >= 2.0 / w) {
    k2 = std::pow(x0, lam - 1.0);
    area2 = k2 * 2.0 * std::exp(-0.5 * w * x0) / w;
  } else {
    k1 = std::exp(-w);  // bound on exp(-w(x+1/x)/2) since x + 1/x >= 2
    area1 = (lam == 0.0) ? k1 * std::log(2.0 / (w * w))
                         : (k1 / lam) * (std::pow(2.0 / w, lam) - std::pow(x0, lam));
    k2 = std::pow(2.0 / w, lam - 1.0);
    area2 = k2 * 2.0 * std::exp(-1.0) / w;
  }
  const double total = area0 + area1 + area2;

  for (;;) {
    double v = total * rng.uniform();
    double z, hz;
    if (v <= area0) {
      z = x0 * v / area0;
      hz = k0;
    } else if ((v -= area0) <= area1) {
      if (lam == 0.0) {
        z = w * std::exp(v * std::exp(w));
        hz = k1 / z;
      } else {
        z = std::pow(std::pow(x0, lam) + v * lam / k1, 1.0 / lam);
        hz = k1 * std::pow(z, lam - 1.0);
      }
    } else {
      v -= area1;
      const double t0 = std::max(x0, 2.0 / w);
      z = -2.0 / w * std::log(std::exp(-0.5 * w * t0) - v * w / (2.0 * k2));
      hz = k2 * std::exp(-0.5 * w * z);
    }
    const double u = rng.uniform() * hz;
    if (std::log(u) <= log_kernel(z, lam, w)) return z;
  }
}

double sample_gig_standard(double lam, double w, RngState& rng) {
  if (lam > 2.0 || w > 3.0) return gig_rou_shift(lam, w, rng);
  if (lam >= 1.0 - 2.25 * w * w || w > 0.2) return gig_rou_noshift(lam, w, rng);
  return gig_three_part(lam, w, rng);
}

}  // namespace

double sample_gig(const GigParams& p, RngState& rng) {
  p.validate();
  const double w = p.a * p.b;
  if (p.gamma < 0) {
    // X ~ GIG(gamma, a, b)  <=>  1/X ~ GIG(-gamma, b, a)
    const double z = sample_gig_standard(-p.gamma, w, rng);
    return 1.0 / ((p.b / p.a) * z);
  }
  return (p.a / p.b) * sample_gig_standard(p.gamma, w, rng);
}

Vec sample_mvn_cov(const Vec& mean, const SpdFactor& cov, RngState& rng) {
  return mean + cov.lower() * rng.normal_vec(cov.dim());
}

Vec sample_mvn_prec(const Vec& mean, const SpdFactor& prec, RngState& rng) {
  // z ~ N(0, I) then solve L^T x = z gives cov (L L^T)^{-1}
  return mean + prec.solve_lower_t(rng.normal_vec(prec.dim()));
}

}  // namespace spmem
