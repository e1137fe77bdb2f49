#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "spmem/diagnostics.hpp"
#include "spmem/simulation.hpp"
#include "support/teststat.hpp"

using namespace spmem;

TEST_CASE("built-in layout: 97 grid sites plus the 11 validation sites") {
  const auto& sites = builtin_sites();
  const auto& holdout = builtin_holdout();
  REQUIRE(sites.size() == 108);
  REQUIRE(holdout.size() == 11);
  CHECK(holdout[0].x == 14.143578);
  CHECK(holdout[0].y == 8.449528);
  CHECK(holdout[10].x == 38.923097);
  // holdout sites are embedded verbatim at the tail
  for (int i = 0; i < 11; ++i) {
    CHECK(sites[97 + i].x == holdout[i].x);
    CHECK(sites[97 + i].y == holdout[i].y);
  }
  // distinct and inside a sane bounding box
  double mind = 1e30;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    CHECK(sites[i].x > -2.0);
    CHECK(sites[i].x < 52.0);
    CHECK(sites[i].y > -2.0);
    CHECK(sites[i].y < 52.0);
    for (std::size_t j = i + 1; j < sites.size(); ++j)
      mind = std::min(mind, distance(sites[i], sites[j]));
  }
  CHECK(mind > 0.5);
}

TEST_CASE("simulate_field: deterministic given the seed") {
  SimSpec spec;
  spec.locations = builtin_sites();
  RngState r1(2020), r2(2020);
  const auto a = simulate_field(spec, r1);
  const auto b = simulate_field(spec, r2);
  CHECK((a.data.y() - b.data.y()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.data.mu() - b.data.mu()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("simulate_field: zero spatial variance gives a deterministic line") {
  SimSpec spec;
  spec.locations = {{0, 0}, {5, 5}, {10, 0}, {2, 8}};
  spec.sigma2 = 0.0;
  spec.omega2 = 1.1;
  RngState rng(91);
  const auto field = simulate_field(spec, rng);
  for (int i = 0; i < 4; ++i)
    CHECK(field.data.y()[i] ==
          doctest::Approx(spec.beta0 + spec.beta1 * field.data.mu()(i, 1))
              .epsilon(1e-12));
}

TEST_CASE("simulated responses have variance sigma2 (1 + omega2) at one site") {
  // single-site replications: covariance reduces to the i==j case
  SimSpec spec;
  spec.locations = {{0, 0}, {1000, 1000}};  // far apart, effectively independent
  spec.sigma2 = 1.0;
  spec.omega2 = 1.1;
  RngState rng(404);
  const int reps = 10000;
  std::vector<double> ys(reps);
  for (int r = 0; r < reps; ++r) {
    const auto f = simulate_field(spec, rng);
    ys[r] = f.data.y()[0] - spec.beta0 - spec.beta1 * f.data.mu()(0, 1);
  }
  const double var = teststat::variance(ys);
  const double target = spec.sigma2 * (1 + spec.omega2);
  // var of sample variance ~ 2 sigma^4/n
  CHECK(std::abs(var - target) < 4 * target * std::sqrt(2.0 / reps));
}

TEST_CASE("spatial covariance across two fixed sites matches sigma2 C(h)") {
  SimSpec spec;
  spec.locations = {{0, 0}, {1.0, 0}};
  spec.kernel = ExponentialKernel{1.2};
  spec.sigma2 = 1.0;
  spec.omega2 = 1.1;
  RngState rng(505);
  const int reps = 20000;
  std::vector<double> a(reps), b(reps);
  for (int r = 0; r < reps; ++r) {
    const auto f = simulate_field(spec, rng);
    a[r] = f.data.y()[0] - spec.beta0 - spec.beta1 * f.data.mu()(0, 1);
    b[r] = f.data.y()[1] - spec.beta0 - spec.beta1 * f.data.mu()(1, 1);
  }
  double cov = 0;
  const double ma = teststat::mean(a), mb = teststat::mean(b);
  for (int r = 0; r < reps; ++r) cov += (a[r] - ma) * (b[r] - mb);
  cov /= reps - 1;
  const double target = spec.sigma2 * std::exp(-1.0 / 1.2);
  CHECK(std::abs(cov - target) < 3 * 2.1 * 2.1 / std::sqrt(double(reps)));
}

TEST_CASE("contaminate: surrogate is x - v, response untouched, truth recorded") {
  SimSpec spec;
  spec.locations = builtin_sites();
  RngState rng(66);
  const auto field = simulate_field(spec, rng);
  const auto cont = contaminate(field.data, std::sqrt(0.1), rng, 1.0);

  CHECK((cont.observed.y() - field.data.y()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(cont.observed.error_mask() == std::vector<bool>{false, true});
  CHECK(cont.truth.tau == doctest::Approx(std::sqrt(0.1)));
  for (int i = 0; i < cont.observed.n(); ++i)
    CHECK(cont.observed.mu()(i, 1) ==
          doctest::Approx(cont.truth.x[i] - cont.truth.v[i]).epsilon(1e-15));

  // v is standard normal: mean of mu matches mean of x within noise
  const double mx = cont.truth.x.mean();
  const double mmu = cont.observed.mu().col(1).mean();
  CHECK(std::abs(mx - mmu) < 4.0 / std::sqrt(108.0));
  const double vvar = (cont.truth.v.array() - cont.truth.v.mean()).square().sum() / 107.0;
  CHECK(vvar == doctest::Approx(1.0).epsilon(0.6));

  // scaled variant shrinks the error by the requested factor
  RngState rng2(66);
  const auto f2 = simulate_field(spec, rng2);
  const auto scaled = contaminate(f2.data, std::sqrt(0.1), rng2, 0.1);
  const double vvar2 =
      (scaled.truth.v.array() - scaled.truth.v.mean()).square().sum() / 107.0;
  CHECK(vvar2 == doctest::Approx(0.01).epsilon(0.6));
}

TEST_CASE("holdout split: partition semantics") {
  SimSpec spec;
  spec.locations = builtin_sites();
  spec.holdout = builtin_holdout();
  RngState rng(31);
  const auto field = simulate_field(spec, rng);

  const auto split = holdout_split(field.data, spec.holdout);
  REQUIRE(split.test.has_value());
  CHECK(split.train.n() == 97);
  CHECK(split.test->n() == 11);
  CHECK(split.test->locations()[0].x == 14.143578);

  // disjoint union preserving order: first train row is the first site
  CHECK(split.train.locations()[0].x == builtin_sites()[0].x);
  // responses carried through unchanged
  CHECK(split.test->y()[0] == field.data.y()[97]);

  // empty holdout: full train, no test
  const auto none = holdout_split(field.data, {});
  CHECK(none.train.n() == 108);
  CHECK(!none.test.has_value());

  // absent holdout location fails
  CHECK_THROWS_AS(holdout_split(field.data, {{-1.0, -1.0}}), DataError);
}

TEST_CASE("tau = 0 still contaminates but the naive view explains the data") {
  // dic computed on a naive-style chain built from MEM draws with tau2 ~ 0
  // stays within noise of the same chain evaluated as a true naive chain
  SimSpec spec;
  spec.locations = builtin_sites();
  RngState rng(77);
  const auto field = simulate_field(spec, rng);
  const auto cont = contaminate(field.data, 0.0, rng, 1.0);
  CHECK(cont.truth.tau == 0.0);

  Chain mem_like, naive_like;
  RngState prng(5);
  for (int i = 0; i < 20; ++i) {
    Draw d;
    d.params.beta = Vec(2);
    d.params.beta << 0.5 + 0.01 * prng.normal(), 2.0 + 0.01 * prng.normal();
    d.params.sigma2 = 1.0 + 0.05 * prng.uniform();
    d.params.omega2 = 1.0 + 0.05 * prng.uniform();
    d.params.tau2 = 1e-12;
    d.params.kernel = ExponentialKernel{1.2};
    d.latent.epsilon = Vec::Zero(cont.observed.n());
    d.latent.v = Mat::Zero(cont.observed.n(), 2);
    naive_like.draws.push_back(d);
    naive_like.draws.back().params.tau2 = 0.0;
    mem_like.draws.push_back(std::move(d));
  }
  const auto dist = pairwise_distances(cont.observed.locations());
  const double dic_mem = dic(mem_like, cont.observed, dist);
  const double dic_naive = dic(naive_like, cont.observed, dist);
  CHECK(dic_mem == doctest::Approx(dic_naive).epsilon(1e-6));
}
