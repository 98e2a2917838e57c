#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fredholm/convergence.hpp"
#include "fredholm/errors.hpp"
#include "fredholm/kernel.hpp"
#include "fredholm/noise.hpp"
#include "fredholm/sampling.hpp"
#include "helpers.hpp"
#include "json.hpp"

using namespace fredholm;

namespace {

// Label noise with drift and loadings affine in the label over two common
// streams (one Brownian, one time-constant normal).  Affine label dependence
// keeps the block-projection residual computable by hand.
NoiseModel affine_label_noise(const TimeGrid& grid, int n_u, std::uint64_t seed) {
  NoiseModel m;
  m.grid = grid;
  m.dim = n_u;
  m.drift.resize(n_u, grid.n_t);
  StreamGroup bm;
  bm.kind = StreamKind::Brownian;
  bm.dim = 1;
  bm.common = true;
  bm.tag = "common-bm";
  StreamGroup cr;
  cr.kind = StreamKind::ConstantRandom;
  cr.dim = 1;
  cr.common = true;
  cr.tag = "common-level";
  m.groups = {bm, cr};
  m.loadings.assign(2, Eigen::MatrixXd::Zero(n_u, grid.n_t));
  const double a0 = 0.4 + 0.4 * testutil::uniform(seed, 11, 0, 0, 0);
  const double a1 = 0.3 + 0.5 * testutil::uniform(seed, 11, 1, 0, 0);
  const double l0 = 0.3 + 0.3 * testutil::uniform(seed, 11, 2, 0, 0);
  const double l1 = 0.2 + 0.4 * testutil::uniform(seed, 11, 3, 0, 0);
  const double c0 = 0.2 + 0.2 * testutil::uniform(seed, 11, 4, 0, 0);
  const double c1 = 0.1 + 0.3 * testutil::uniform(seed, 11, 5, 0, 0);
  for (int u = 0; u < n_u; ++u) {
    const double lab = (u + 0.5) / n_u;
    for (int j = 0; j < grid.n_t; ++j) {
      const double t = grid.t[j];
      m.drift(u, j) = a0 + a1 * lab + 0.2 * t;
      m.loadings[0](u, j) = l0 + l1 * lab + 0.05 * t;
      m.loadings[1](u, j) = c0 + c1 * lab;
    }
  }
  m.validate();
  return m;
}

// Step noise constant on each of n_blocks label blocks (shared streams), so
// block averaging at any multiple of n_blocks reproduces it exactly.
NoiseModel step_label_noise(const TimeGrid& grid, int n_u, int n_blocks, std::uint64_t seed) {
  NoiseModel fine = affine_label_noise(grid, n_blocks, seed);
  Eigen::MatrixXd ext = Eigen::MatrixXd::Zero(n_u, n_blocks);
  for (int u = 0; u < n_u; ++u) ext(u, u * n_blocks / n_u) = 1.0;
  return linear_map(fine, ext);
}

GivenSequenceConfig smooth_config(std::uint64_t seed) {
  const auto grid = make_grid(1.0, 16);
  GivenSequenceConfig cfg;
  cfg.graphon.grid = grid;
  cfg.graphon.A_tilde = testutil::psd_volterra(grid, seed, 0.4);
  cfg.graphon.B_tilde = testutil::random_volterra(grid, 1, seed + 1, 0.25);
  cfg.graphon.lambda = 1.0;
  cfg.graphon.graphon = graphon_from_fn(16, [](double u, double v) { return u * v; });
  cfg.graphon.noise = affine_label_noise(grid, 16, seed + 2);
  cfg.N_values = {4, 8};
  cfg.n_paths = 300;
  cfg.seed = seed;
  return cfg;
}

// Two-block step graphon with zero diagonal blocks, boundary points assigned
// to the left block so the right-endpoint latents of deterministic sampling
// stay inside their intended block.
double two_block_zero_diag(double u, double v) {
  const auto blk = [](double x) {
    return std::min(1, std::max(0, static_cast<int>(std::ceil(x * 2.0)) - 1));
  };
  return blk(u) == blk(v) ? 0.0 : 0.6;
}

SampledRunConfig sampled_base(std::uint64_t seed, SampleKind kind) {
  SampledRunConfig cfg;
  cfg.grid = make_grid(1.0, 8);
  cfg.A_tilde = testutil::psd_volterra(cfg.grid, seed, 0.4);
  cfg.B_tilde = testutil::random_volterra(cfg.grid, 1, seed + 1, 0.25);
  cfg.lambda = 1.0;
  cfg.W = [](double u, double v) { return 0.5 * (1.0 + u * v); };
  cfg.n_u = 16;
  cfg.label_noise = affine_label_noise(cfg.grid, 16, seed + 2);
  cfg.L0 = 0.5;
  cfg.K0 = 1.0;
  cfg.kind = kind;
  cfg.N_values = {4, 8};
  cfg.delta = 0.05;
  cfg.replications = 3;
  cfg.n_paths = 40;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("step profile: reshape, constants, and exact block-mean inverse") {
  const int N = 3, n_t = 5, n_u = 12;
  Eigen::MatrixXd alpha(N, n_t);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < n_t; ++j) alpha(i, j) = testutil::sym_uniform(3, i, j, 0, 0, 2.0);

  const Eigen::MatrixXd same = step_profile(alpha, N);
  CHECK((same - alpha).cwiseAbs().maxCoeff() == 0.0);

  const Eigen::MatrixXd field = step_profile(alpha, n_u);
  REQUIRE(field.rows() == n_u);
  for (int u = 0; u < n_u; ++u)
    CHECK((field.row(u) - alpha.row(u * N / n_u)).cwiseAbs().maxCoeff() == 0.0);

  Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(N, n_t, 0.7);
  CHECK((step_profile(flat, n_u).array() == 0.7).all());

  // n_u / N = 4 copies per block: averaging equal doubles is exact.
  const Eigen::MatrixXd back = block_average_map(N, n_u) * field;
  CHECK((back - alpha).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(step_profile(alpha, 10), std::invalid_argument);
  CHECK_THROWS_AS(block_average_map(0, 8), std::invalid_argument);
}

TEST_CASE("block-average weights: block means of the graphon with zero diagonal") {
  const auto g = graphon_from_fn(8, [](double u, double v) { return 0.25 * (u + v) + 0.1; });
  const Eigen::MatrixXd w = block_average_weights(g, 4);
  Eigen::MatrixXd expect = block_average(g, 4);
  expect.diagonal().setZero();
  CHECK((w - expect).cwiseAbs().maxCoeff() == 0.0);
  CHECK(w.diagonal().cwiseAbs().maxCoeff() == 0.0);
  CHECK((w - w.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("field distance: zero, constant offset, and deterministic quadrature") {
  const auto grid = make_grid(1.0, 64);
  std::vector<Eigen::MatrixXd> f(3), g(3), zero(3), ramp(3);
  for (int p = 0; p < 3; ++p) {
    f[p] = Eigen::MatrixXd::Random(4, grid.n_t);
    g[p] = f[p];
    zero[p] = Eigen::MatrixXd::Zero(4, grid.n_t);
    ramp[p] = Eigen::MatrixXd::Zero(4, grid.n_t);
    for (int j = 0; j < grid.n_t; ++j) ramp[p].col(j).setConstant(grid.t[j]);
  }
  const auto same = l2_field_distance(grid, f, g);
  CHECK(same.value == 0.0);
  CHECK(same.std_error == 0.0);

  std::vector<Eigen::MatrixXd> off = f;
  for (auto& m : off) m.array() += 1.0;
  const auto unit = l2_field_distance(grid, f, off);
  CHECK(unit.value == doctest::Approx(grid.T).epsilon(1e-12));
  CHECK(unit.std_error <= 1e-14);

  const auto third = l2_field_distance(grid, ramp, zero);
  CHECK(std::abs(third.value - 1.0 / 3.0) < 2.0 * grid.dt);

  std::vector<Eigen::MatrixXd> bad(2, Eigen::MatrixXd::Zero(4, grid.n_t));
  CHECK_THROWS_AS(l2_field_distance(grid, f, bad), std::invalid_argument);
}

TEST_CASE("expected L2 norm: hand values for drift, Brownian, and constant-random parts") {
  const auto grid = make_grid(1.0, 8);
  NoiseModel m;
  m.grid = grid;
  m.dim = 2;
  m.drift = Eigen::MatrixXd::Zero(2, grid.n_t);
  for (int j = 0; j < grid.n_t; ++j) m.drift(0, j) = 0.7 + 0.3 * grid.t[j];
  StreamGroup bm;
  bm.kind = StreamKind::Brownian;
  bm.dim = 1;
  StreamGroup cr;
  cr.kind = StreamKind::ConstantRandom;
  cr.dim = 1;
  m.groups = {bm, cr};
  m.loadings.assign(2, Eigen::MatrixXd::Zero(2, grid.n_t));
  m.loadings[0].row(1).setConstant(0.5);  // Brownian: Var M_{t_j} = t_j
  m.loadings[1].row(1).setConstant(0.2);  // constant-random: Var = 1 at all nodes
  m.validate();

  double acc = 0.0;
  for (int j = 0; j < grid.n_t; ++j) {
    acc += grid.dt * m.drift(0, j) * m.drift(0, j);
    acc += grid.dt * (0.25 * grid.t[j] + 0.04);
  }
  CHECK(expected_l2_norm(m) == doctest::Approx(std::sqrt(acc / 2.0)).epsilon(1e-12));

  // Monte Carlo cross-check of the closed form on a mixed model.
  const auto model = affine_label_noise(grid, 6, 21);
  const auto paths = simulate(model, 4000, 99);
  std::vector<double> per(paths.size());
  for (std::size_t p = 0; p < paths.size(); ++p)
    per[p] = grid.dt * paths[p].realized.squaredNorm() / model.dim;
  double mean = 0.0;
  for (double v : per) mean += v;
  mean /= per.size();
  double ss = 0.0;
  for (double v : per) ss += (v - mean) * (v - mean);
  const double se = std::sqrt(ss / (per.size() - 1.0) / per.size());
  const double exact = expected_l2_norm(model);
  CHECK(std::abs(mean - exact * exact) <= 3.0 * se);
}

TEST_CASE("noise projection error: hand formula, exact zeros, decay, Monte Carlo") {
  const auto grid = make_grid(1.0, 8);
  const int n_u = 8;

  // Pure slope drift b(u, t) = lab(u) * mt(t): the residual factorizes into a
  // label variance times the time integral.
  NoiseModel slope;
  slope.grid = grid;
  slope.dim = n_u;
  slope.drift.resize(n_u, grid.n_t);
  for (int u = 0; u < n_u; ++u)
    for (int j = 0; j < grid.n_t; ++j)
      slope.drift(u, j) = ((u + 0.5) / n_u) * (1.0 + 0.5 * grid.t[j]);
  slope.validate();

  double time_part = 0.0;
  for (int j = 0; j < grid.n_t; ++j) {
    const double mt = 1.0 + 0.5 * grid.t[j];
    time_part += grid.dt * mt * mt;
  }
  const auto label_var = [&](int N) {
    const int k = n_u / N;
    double acc = 0.0;
    for (int b = 0; b < N; ++b) {
      double mean = 0.0;
      for (int c = 0; c < k; ++c) mean += (b * k + c + 0.5) / n_u;
      mean /= k;
      for (int c = 0; c < k; ++c) {
        const double d = (b * k + c + 0.5) / n_u - mean;
        acc += d * d;
      }
    }
    return acc / n_u;
  };
  const double psi2 = noise_projection_error(slope, 2);
  const double psi4 = noise_projection_error(slope, 4);
  CHECK(psi2 == doctest::Approx(std::sqrt(label_var(2) * time_part)).epsilon(1e-12));
  CHECK(psi4 == doctest::Approx(std::sqrt(label_var(4) * time_part)).epsilon(1e-12));
  CHECK(psi4 < 0.6 * psi2);
  CHECK(noise_projection_error(slope, n_u) == 0.0);

  // Step noise with two blocks projects exactly at any multiple of two.
  const auto step = step_label_noise(grid, n_u, 2, 5);
  CHECK(noise_projection_error(step, 2) == 0.0);
  CHECK(noise_projection_error(step, 4) == 0.0);

  // Monte Carlo cross-check on a stochastic model.
  const auto model = affine_label_noise(grid, n_u, 31);
  const int N = 2;
  const Eigen::MatrixXd avg = block_average_map(N, n_u);
  const auto paths = simulate(model, 3000, 77);
  std::vector<double> per(paths.size());
  for (std::size_t p = 0; p < paths.size(); ++p) {
    const Eigen::MatrixXd diff =
        paths[p].realized - step_profile(avg * paths[p].realized, n_u);
    per[p] = grid.dt * diff.squaredNorm() / n_u;
  }
  double mean = 0.0;
  for (double v : per) mean += v;
  mean /= per.size();
  double ss = 0.0;
  for (double v : per) ss += (v - mean) * (v - mean);
  const double se = std::sqrt(ss / (per.size() - 1.0) / per.size());
  const double psi = noise_projection_error(model, N);
  CHECK(std::abs(mean - psi * psi) <= 3.0 * se);
}

TEST_CASE("given sequence: smooth graphon run decreases, fits, and reproduces") {
  const auto cfg = smooth_config(101);
  const auto run = run_given_sequence(cfg);

  REQUIRE(run.entries.size() == 2);
  const auto& e4 = run.entries[0];
  const auto& e8 = run.entries[1];
  CHECK(e4.N == 4);
  CHECK(e8.N == 8);
  CHECK(e4.error >= 0.0);
  CHECK(e8.error >= 0.0);
  // Paired ensembles: the distance shrinks along the sequence.
  CHECK(e8.error <=
        e4.error + 3.0 * std::sqrt(e4.std_error * e4.std_error + e8.std_error * e8.std_error));

  CHECK(e4.cut_exact);
  CHECK(e8.cut_exact);
  CHECK(e4.cut_norm > 0.0);
  CHECK(e8.cut_norm < e4.cut_norm);
  CHECK(e4.norm_term == doctest::Approx(std::sqrt(e4.cut_norm)).epsilon(1e-15));
  CHECK(e4.noise_term == noise_projection_error(cfg.graphon.noise, 4));
  CHECK(e8.noise_term < e4.noise_term);

  CHECK(e4.in_fit);
  CHECK(!e8.in_fit);
  CHECK(run.checked == 1);
  CHECK(run.violations == 0);
  CHECK(run.K > 0.0);
  CHECK(run.fit_residuals.size() == 1);
  CHECK(std::abs(run.fit_residuals[0]) <= 1e-12);  // single fit point: exact fit
  CHECK(e8.passed);

  CHECK(run.c0_common > 0.0);
  CHECK(run.graphon_c0 > 0.0);
  CHECK(run.c0_common <= run.graphon_c0 + 1e-15);

  // Common random numbers beat independent pairing on every run.
  CHECK(run.paired_variance > 0.0);
  CHECK(run.paired_variance < run.unpaired_variance);

  // Bit-exact reproducibility of the artifacts.
  const auto rerun = run_given_sequence(cfg);
  CHECK(errors_csv(run) == errors_csv(rerun));
  CHECK(summary_json_text(run) == summary_json_text(rerun));
}

TEST_CASE("given sequence: step graphon at block multiples is exact") {
  const auto grid = make_grid(1.0, 12);
  GivenSequenceConfig cfg;
  cfg.graphon.grid = grid;
  cfg.graphon.A_tilde = testutil::psd_volterra(grid, 7, 0.4);
  cfg.graphon.B_tilde = testutil::random_volterra(grid, 1, 8, 0.3);
  cfg.graphon.lambda = 1.0;
  cfg.graphon.graphon = graphon_from_fn(8, two_block_zero_diag);
  cfg.graphon.noise = step_label_noise(grid, 8, 2, 9);
  cfg.N_values = {2, 4};
  cfg.n_paths = 60;
  cfg.seed = 3;

  const auto run = run_given_sequence(cfg);
  REQUIRE(run.entries.size() == 2);
  for (const auto& ent : run.entries) {
    CHECK(ent.cut_norm == 0.0);
    CHECK(ent.noise_term <= 1e-14);  // mathematically zero; rounding residue only
    CHECK(ent.error <= std::max(3.0 * ent.std_error, 1e-12));
    CHECK(ent.passed);
  }
  CHECK(std::abs(run.K) <= 1e-10);
  CHECK(run.violations == 0);
}

TEST_CASE("given sequence: coercivity failure at a finite N aborts") {
  auto cfg = smooth_config(55);
  cfg.graphon.lambda = 0.3;
  cfg.graphon.A_tilde = zero_kernel(cfg.graphon.grid, 1);
  cfg.graphon.B_tilde = scalar_kernel_from_fn(cfg.graphon.grid, [](double, double) { return -0.5; });
  // Weights far above 1 push the aggregate mode of the N-player form negative
  // while the continuum game (spectrum within [-1, 1]) stays coercive.
  cfg.graph_source = [](int N) {
    Eigen::MatrixXd w = Eigen::MatrixXd::Constant(N, N, 3.0 * N / (N - 1.0));
    w.diagonal().setZero();
    return w;
  };
  CHECK(GraphonSolver(cfg.graphon).coercivity().passed);
  CHECK_THROWS_AS(run_given_sequence(cfg), assumption_error);
}

TEST_CASE("given sequence: malformed configs are rejected") {
  auto cfg = smooth_config(42);
  cfg.N_values = {4, 6};  // 6 does not divide 16
  CHECK_THROWS_AS(run_given_sequence(cfg), std::invalid_argument);
  cfg.N_values = {8, 4};
  CHECK_THROWS_AS(run_given_sequence(cfg), std::invalid_argument);
  cfg.N_values = {4, 8};
  cfg.n_paths = 1;
  CHECK_THROWS_AS(run_given_sequence(cfg), std::invalid_argument);
}

TEST_CASE("sampled: deterministic weighted sampling of a step graphon is exact") {
  SampledRunConfig cfg = sampled_base(202, SampleKind::S1);
  cfg.W = two_block_zero_diag;
  cfg.n_u = 8;
  cfg.label_noise = step_label_noise(cfg.grid, 8, 2, 12);
  cfg.L0 = 0.0;  // piecewise constant: flat within blocks
  cfg.K0 = 1.0;
  cfg.N_values = {4, 8};
  cfg.replications = 2;
  cfg.n_paths = 50;

  const auto run = run_sampled(cfg);
  REQUIRE(run.entries.size() == 4);
  for (const auto& ent : run.entries) {
    CHECK(!ent.skipped);
    CHECK(ent.noise_term == 0.0);
    CHECK(ent.norm_term > 0.0);  // the bound stays positive even when the draw is exact
    CHECK(ent.error <= std::max(3.0 * ent.std_error, 1e-12));
    CHECK(ent.passed);
  }
  CHECK(run.skip_count == 0);
  CHECK(run.violations == 0);
  CHECK(run.within_envelope_fraction(8) == 1.0);
}

TEST_CASE("sampled: Bernoulli(1) on the all-ones graphon equals weighted sampling") {
  SampledRunConfig s1 = sampled_base(303, SampleKind::S1);
  s1.W = [](double, double) { return 1.0; };
  s1.L0 = 0.0;
  s1.K0 = 1.0;
  SampledRunConfig s3 = s1;
  s3.kind = SampleKind::S3;
  s3.kappa_rule = [](int) { return 1.0; };

  const auto run1 = run_sampled(s1);
  const auto run3 = run_sampled(s3);
  REQUIRE(run1.entries.size() == run3.entries.size());
  CHECK(run3.skip_count == 0);
  for (std::size_t i = 0; i < run1.entries.size(); ++i) {
    CHECK(run1.entries[i].error == run3.entries[i].error);
    CHECK(run1.entries[i].std_error == run3.entries[i].std_error);
    // Bernoulli mode reports the edge-resampling bound, which is wider.
    CHECK(run3.entries[i].norm_term > run1.entries[i].norm_term);
  }
}

TEST_CASE("sampled: stochastic latents run, reproduce, and respect the window") {
  SampledRunConfig cfg = sampled_base(404, SampleKind::S2);
  cfg.n_u = 25;
  cfg.label_noise = affine_label_noise(cfg.grid, 25, 404);
  cfg.N_values = {25};
  cfg.delta = 0.2;
  cfg.replications = 3;
  cfg.n_paths = 24;
  cfg.L0 = 1.0;
  cfg.K0 = 1.0;
  cfg.W = [](double u, double v) { return u * v; };

  const auto run = run_sampled(cfg);
  REQUIRE(run.entries.size() == 3);
  for (int r = 0; r < 3; ++r) {
    CHECK(run.entries[r].replication == r);
    CHECK(run.entries[r].error > 0.0);
    CHECK(run.entries[r].in_fit);
  }
  CHECK(run.checked == 0);
  CHECK(run.paired_variance < run.unpaired_variance);

  const auto rerun = run_sampled(cfg);
  CHECK(errors_csv(run) == errors_csv(rerun));

  // The confidence window for stochastic latents is enforced up front.
  SampledRunConfig bad = cfg;
  bad.delta = 0.05;  // 25 e^{-5} > 0.05: inadmissible at N = 25
  CHECK_THROWS_AS(run_sampled(bad), std::invalid_argument);

  // Bernoulli edges on top of stochastic latents: same window, wider bound.
  SampledRunConfig s4 = cfg;
  s4.kind = SampleKind::S4;
  s4.kappa_rule = [](int N) { return std::log(N) * std::log(N) / N; };
  const auto run4 = run_sampled(s4);
  REQUIRE(run4.entries.size() == 3);
  const SamplingBounds b25 = sampling_error_bounds(
      25, cfg.L0, cfg.K0, cfg.delta, std::log(25.0) * std::log(25.0) / 25.0, SampleKind::S4);
  CHECK(b25.rho_prime > b25.rho);
  for (const auto& ent : run4.entries) {
    CHECK(ent.norm_term == b25.rho_prime);
    if (!ent.skipped) CHECK(ent.error > 0.0);
  }
}

TEST_CASE("sampled: kappa and delta validation") {
  SampledRunConfig cfg = sampled_base(505, SampleKind::S3);
  cfg.delta = 0.5;  // >= e^{-1}
  CHECK_THROWS_AS(run_sampled(cfg), std::invalid_argument);

  cfg.delta = 0.05;
  cfg.kappa_rule = [](int) { return 1.5; };
  CHECK_THROWS_AS(run_sampled(cfg), std::invalid_argument);

  cfg.kappa_rule = [](int N) { return 1.0 / (N * N); };  // log(N)/(kappa N) = N log N grows
  CHECK_THROWS_AS(run_sampled(cfg), std::invalid_argument);

  // The sparse rule (log N)^2 / N passes the monotonicity precondition.
  cfg.N_values = {8, 16};
  cfg.n_u = 16;
  cfg.label_noise = affine_label_noise(cfg.grid, 16, 505);
  cfg.kappa_rule = [](int N) { return std::log(N) * std::log(N) / N; };
  cfg.replications = 2;
  cfg.n_paths = 16;
  const auto run = run_sampled(cfg);
  CHECK(run.entries.size() == 4);
  const SamplingBounds b8 = sampling_error_bounds(8, cfg.L0, cfg.K0, cfg.delta,
                                                  std::log(8.0) * std::log(8.0) / 8.0,
                                                  SampleKind::S3);
  CHECK(run.entries[0].norm_term == b8.rho_prime);
}

TEST_CASE("sampled: coercivity gate failures are recorded and excluded") {
  SampledRunConfig cfg = sampled_base(606, SampleKind::S3);
  cfg.N_values = {4, 8};
  cfg.delta = 0.3;
  cfg.replications = 2;
  cfg.n_paths = 16;
  cfg.kappa_rule = [](int) { return 0.9; };
  cfg.c0_reference = 1e6;  // threshold far above any sampled form: every draw fails

  const auto run = run_sampled(cfg);
  REQUIRE(run.entries.size() == 4);
  CHECK(run.skip_count == 4);
  for (const auto& ent : run.entries) {
    CHECK(ent.skipped);
    CHECK(std::isnan(ent.error));
    CHECK(!ent.passed);
  }
  CHECK(run.checked == 0);
  CHECK(run.violations == 0);
  CHECK(run.K == 0.0);
  CHECK(std::isnan(run.mean_error(4)));

  cfg.c0_reference = 0.0;  // the game's own constant: healthy draws all pass
  const auto ok = run_sampled(cfg);
  CHECK(ok.skip_count == 0);
}

TEST_CASE("artifacts: CSV shape and JSON summary") {
  const auto run = run_given_sequence(smooth_config(707));
  const std::string csv = errors_csv(run);
  CHECK(csv.rfind("N,replication,error,stderr,norm_term,noise_term,envelope,passed\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + static_cast<long>(run.entries.size()));

  const auto doc = nlohmann::json::parse(summary_json_text(run));
  CHECK(doc.at("mode") == "given");
  CHECK(doc.at("N_values").size() == 2);
  CHECK(doc.at("violations").get<int>() == 0);
  CHECK(doc.at("per_N").size() == 2);
  CHECK(doc.at("per_N")[0].at("N").get<int>() == 4);
  CHECK(doc.at("per_N")[0].at("within_envelope_fraction").get<double>() == 1.0);
  CHECK(doc.at("per_N")[0].contains("cut_norm"));
  CHECK(doc.at("envelope_constant").get<double>() == run.K);

  SampledRunConfig sc = sampled_base(808, SampleKind::S1);
  const auto srun = run_sampled(sc);
  const auto sdoc = nlohmann::json::parse(summary_json_text(srun));
  CHECK(sdoc.at("mode") == "sampled");
  CHECK(sdoc.at("kind") == "S1");
  CHECK(sdoc.at("delta").get<double>() == sc.delta);
  CHECK(!sdoc.at("per_N")[0].contains("cut_norm"));
}
