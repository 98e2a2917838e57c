#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "fredholm/noise.hpp"
#include "fredholm/rng.hpp"

using namespace fredholm;

namespace {

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

NoiseModel brownian_model(const TimeGrid& g, int dim) {
  NoiseModel m;
  m.grid = g;
  m.dim = dim;
  m.drift = Eigen::MatrixXd::Zero(dim, g.n_t);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < g.n_t; ++j) m.drift(i, j) = 0.3 * (i + 1) + 0.1 * g.t[j];
  StreamGroup grp;
  grp.kind = StreamKind::Brownian;
  grp.dim = 1;
  m.groups = {grp};
  Eigen::MatrixXd load(dim, g.n_t);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < g.n_t; ++j) load(i, j) = 1.0 + 0.5 * i - 0.2 * g.t[j];
  m.loadings = {load};
  return m;
}

}  // namespace

TEST_CASE("inverse normal cdf round-trips against erfc to high accuracy") {
  double worst = 0.0;
  for (int i = 1; i < 2000; ++i) {
    const double u = i / 2000.0;
    worst = std::max(worst, std::abs(std_normal_cdf(inv_normal_cdf(u)) - u));
  }
  // Tails too.
  for (double u : {1e-12, 1e-9, 1e-6, 1.0 - 1e-6, 1.0 - 1e-9}) {
    const double x = inv_normal_cdf(u);
    worst = std::max(worst, std::abs(std_normal_cdf(x) - u) / u);
  }
  CHECK(worst <= 1e-9);
  CHECK(inv_normal_cdf(0.5) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("counter rng is deterministic and maps into the open unit interval") {
  const std::uint64_t a = rng_key(7, 3, 1, 9, 0);
  const std::uint64_t b = rng_key(7, 3, 1, 9, 0);
  CHECK(a == b);
  CHECK(rng_key(7, 3, 1, 9, 1) != a);
  CHECK(rng_key(8, 3, 1, 9, 0) != a);
  for (std::uint64_t x : std::vector<std::uint64_t>{0, 1, ~std::uint64_t(0), a}) {
    const double u = u01_from_bits(x);
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("brownian drivers start at zero with sqrt(dt) increments") {
  TimeGrid g = make_grid(1.0, 16);
  NoiseModel m = brownian_model(g, 1);
  const int P = 4000;
  double mean = 0.0, var = 0.0;
  int n_inc = 0;
  for (int p = 0; p < P; ++p) {
    Eigen::MatrixXd d = simulate_drivers(m, p, 11);
    CHECK(d(0, 0) == 0.0);
    for (int k = 1; k < g.n_t; ++k) {
      const double inc = d(0, k) - d(0, k - 1);
      mean += inc;
      var += inc * inc;
      ++n_inc;
    }
  }
  mean /= n_inc;
  var = var / n_inc - mean * mean;
  CHECK(std::abs(mean) <= 3.0 * std::sqrt(g.dt / n_inc));
  CHECK(var == doctest::Approx(g.dt).epsilon(0.05));
}

TEST_CASE("constant_random streams are constant in time with unit variance") {
  TimeGrid g = make_grid(1.0, 8);
  NoiseModel m = brownian_model(g, 1);
  m.groups[0].kind = StreamKind::ConstantRandom;
  const int P = 4000;
  double var = 0.0;
  for (int p = 0; p < P; ++p) {
    Eigen::MatrixXd d = simulate_drivers(m, p, 5);
    for (int k = 1; k < g.n_t; ++k) CHECK(d(0, k) == d(0, 0));
    var += d(0, 0) * d(0, 0);
  }
  CHECK(var / P == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("ensembles are reproducible and independent of the worker count") {
  TimeGrid g = make_grid(1.0, 12);
  NoiseModel m = brownian_model(g, 2);
  auto a = simulate(m, 9, 123, 1);
  auto b = simulate(m, 9, 123, 4);
  REQUIRE(a.size() == b.size());
  for (std::size_t p = 0; p < a.size(); ++p) {
    CHECK((a[p].drivers - b[p].drivers).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a[p].realized - b[p].realized).cwiseAbs().maxCoeff() == 0.0);
  }
  // Path p of the ensemble equals a standalone simulation of path p.
  Eigen::MatrixXd d3 = simulate_drivers(m, 3, 123);
  CHECK((a[3].drivers - d3).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("realize applies the affine form coordinate-wise") {
  TimeGrid g = make_grid(2.0, 6);
  NoiseModel m = brownian_model(g, 2);
  StreamGroup extra;
  extra.kind = StreamKind::ConstantRandom;
  extra.dim = 1;
  m.groups.push_back(extra);
  Eigen::MatrixXd load2(2, g.n_t);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < g.n_t; ++j) load2(i, j) = 0.7 * i - 0.3 * g.t[j];
  m.loadings.push_back(load2);
  m.validate();

  Eigen::MatrixXd drivers(2, g.n_t);
  drivers << 0.0, 0.1, -0.2, 0.3, 0.4, -0.5,
      1.1, 1.1, 1.1, 1.1, 1.1, 1.1;
  Eigen::MatrixXd b = realize(m, drivers);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < g.n_t; ++j) {
      const double expect = m.drift(i, j) + m.loadings[0](i, j) * drivers(0, j) +
                            m.loadings[1](i, j) * drivers(1, j);
      CHECK(b(i, j) == doctest::Approx(expect).epsilon(1e-15));
    }
}

TEST_CASE("conditional expectations freeze drivers exactly") {
  TimeGrid g = make_grid(1.0, 10);
  NoiseModel m = brownian_model(g, 2);
  Eigen::MatrixXd drivers = simulate_drivers(m, 4, 77);
  Eigen::MatrixXd b = realize(m, drivers);
  const int j = 4;
  Eigen::MatrixXd cond = conditional_expectation(m, drivers, j);
  for (int k = 0; k <= j; ++k)
    CHECK((cond.col(k) - b.col(k)).cwiseAbs().maxCoeff() == 0.0);
  for (int k = j + 1; k < g.n_t; ++k)
    for (int i = 0; i < 2; ++i) {
      const double expect = m.drift(i, k) + m.loadings[0](i, k) * drivers(0, j);
      CHECK(cond(i, k) == doctest::Approx(expect).epsilon(1e-15));
    }
  // At the last node everything is realized.
  Eigen::MatrixXd all = conditional_expectation(m, drivers, g.n_t - 1);
  CHECK((all - b).cwiseAbs().maxCoeff() == 0.0);
  // At time zero a Brownian stream contributes nothing: the conditional
  // expectation is the drift.
  Eigen::MatrixXd zero = conditional_expectation(m, drivers, 0);
  CHECK((zero.rightCols(g.n_t - 1) - m.drift.rightCols(g.n_t - 1)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("custom gaussian groups carry per-step covariance factors") {
  TimeGrid g = make_grid(1.0, 6);
  NoiseModel m;
  m.grid = g;
  m.dim = 1;
  m.drift = Eigen::MatrixXd::Zero(1, g.n_t);
  StreamGroup grp;
  grp.kind = StreamKind::CustomGaussian;
  grp.dim = 2;
  Eigen::MatrixXd L(2, 2);
  L << 0.3, 0.0, 0.1, 0.2;
  grp.step_chol.assign(g.n_t - 1, L);
  m.groups = {grp};
  m.loadings.assign(2, Eigen::MatrixXd::Ones(1, g.n_t));
  m.validate();

  // Exact covariance bookkeeping at node k: k * L L^T.
  Eigen::MatrixXd cov3 = group_covariance(m, 0, 3);
  CHECK((cov3 - 3.0 * L * L.transpose()).cwiseAbs().maxCoeff() <= 1e-15);

  // Monte Carlo covariance of the simulated drivers at the last node.
  const int P = 6000;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(2, 2);
  for (int p = 0; p < P; ++p) {
    Eigen::MatrixXd d = simulate_drivers(m, p, 3);
    acc += d.col(g.n_t - 1) * d.col(g.n_t - 1).transpose();
  }
  acc /= P;
  Eigen::MatrixXd expect = (g.n_t - 1) * L * L.transpose();
  CHECK((acc - expect).cwiseAbs().maxCoeff() <= 0.1 * expect.cwiseAbs().maxCoeff());

  // Validation rejects malformed groups.
  NoiseModel bad = m;
  bad.groups[0].step_chol.pop_back();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  NoiseModel bad2 = brownian_model(g, 1);
  bad2.groups[0].dim = 2;
  CHECK_THROWS_AS(bad2.validate(), std::invalid_argument);
}

TEST_CASE("linear maps commute with realization") {
  TimeGrid g = make_grid(1.0, 8);
  NoiseModel m = brownian_model(g, 3);
  Eigen::MatrixXd w(2, 3);
  w << 1.0, -0.5, 0.25,
      0.0, 2.0, 1.0;
  NoiseModel mapped = linear_map(m, w);
  Eigen::MatrixXd drivers = simulate_drivers(m, 0, 9);
  Eigen::MatrixXd lhs = realize(mapped, drivers);
  Eigen::MatrixXd rhs = w * realize(m, drivers);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK_THROWS_AS(linear_map(m, Eigen::MatrixXd::Ones(2, 4)), std::invalid_argument);
}

TEST_CASE("terminal driver extension is consistent with the step law") {
  TimeGrid g = make_grid(1.0, 8);
  NoiseModel m = brownian_model(g, 1);
  StreamGroup cr;
  cr.kind = StreamKind::ConstantRandom;
  cr.dim = 1;
  m.groups.push_back(cr);
  m.loadings.push_back(Eigen::MatrixXd::Zero(1, g.n_t));
  m.validate();

  const int P = 4000;
  double var = 0.0;
  for (int p = 0; p < P; ++p) {
    Eigen::MatrixXd d = simulate_drivers(m, p, 21);
    Eigen::VectorXd at_T = drivers_at_T(m, {}, d, p, 21);
    // Deterministic in its inputs.
    Eigen::VectorXd again = drivers_at_T(m, {}, d, p, 21);
    CHECK(at_T == again);
    // Constant stream unchanged at T.
    CHECK(at_T(1) == d(1, g.n_t - 1));
    const double inc = at_T(0) - d(0, g.n_t - 1);
    var += inc * inc;
  }
  CHECK(var / P == doctest::Approx(g.dt).epsilon(0.1));
}
