#include "fredholm/finite_game.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "fredholm/errors.hpp"
#include "fredholm/rng.hpp"
#include "fredholm/threading.hpp"

namespace fredholm {

namespace {

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Flattened time-major view of a dim x n_t path array: index j*dim + i.
Eigen::VectorXd flatten(const Eigen::MatrixXd& m) {
  return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

Eigen::MatrixXd unflatten(const Eigen::VectorXd& v, int dim, int n_t) {
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), dim, n_t);
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

bool same_stream_structure(const NoiseModel& a, const NoiseModel& b) {
  if (a.groups.size() != b.groups.size()) return false;
  for (std::size_t g = 0; g < a.groups.size(); ++g) {
    if (a.groups[g].kind != b.groups[g].kind) return false;
    if (a.groups[g].dim != b.groups[g].dim) return false;
  }
  return true;
}

// Dense matrix of a scalar kernel's raw values (no quadrature weight).
Eigen::MatrixXd scalar_kernel_values(const KernelGrid& k) {
  const int n_t = k.grid.n_t;
  Eigen::MatrixXd m(n_t, n_t);
  for (int j = 0; j < n_t; ++j)
    for (int l = 0; l < n_t; ++l) m(j, l) = k.at(j, l)(0, 0);
  return m;
}

}  // namespace

void FiniteGameSpec::validate() const {
  require(N >= 1, "game: N must be at least 1");
  require(grid.n_t >= 2 && static_cast<int>(grid.t.size()) == grid.n_t,
          "game: invalid time grid");
  require(static_cast<int>(lambda.size()) == N, "game: lambda must have one entry per player");
  for (double l : lambda) require(l > 0.0, "game: lambda entries must be positive");
  require(B.grid == grid && B.n == N && B.is_volterra,
          "game: B must be an N-block Volterra kernel on the game grid");
  require(Bbar.grid == grid && Bbar.n == N && Bbar.is_volterra,
          "game: Bbar must be an N-block Volterra kernel on the game grid");
  for (int j = 0; j < grid.n_t; ++j)
    for (int k = 0; k < j; ++k)
      for (int i = 0; i < N; ++i)
        require(Bbar.at(j, k)(i, i) == B.at(j, k)(i, i),
                "game: diagonal blocks of Bbar must equal those of B");
  require(noise.grid == grid && noise.dim == N, "game: noise must have dim N on the game grid");
  noise.validate();
  for (const auto& ck : c_kernels) {
    require(ck.i >= 0 && ck.i < N && ck.j >= 0 && ck.j < N && ck.k >= 0 && ck.k < N,
            "game: C kernel indices out of range");
    require(ck.j != ck.i && ck.k != ck.i, "game: C^{ijk} requires j != i and k != i");
    require(ck.kernel.grid == grid && ck.kernel.n == 1,
            "game: C kernels must be scalar kernels on the game grid");
  }
  if (cross_b) {
    require(cross_b->grid == grid && cross_b->dim == N * N,
            "game: cross_b must have dim N*N on the game grid");
    cross_b->validate();
    require(same_stream_structure(noise, *cross_b),
            "game: cross_b must use the same driver streams as the game noise");
  }
  if (graph_w)
    require(graph_w->rows() == N && graph_w->cols() == N, "game: graph weight matrix must be N x N");
  if (graph_C)
    require(graph_C->grid == grid && graph_C->n == 1,
            "game: graph C kernel must be a scalar kernel on the game grid");
  if (graph_b_star) {
    require(graph_b_star->grid == grid && graph_b_star->dim == 1,
            "game: graph b* noise must have dim 1 on the game grid");
    graph_b_star->validate();
    require(same_stream_structure(noise, *graph_b_star),
            "game: graph b* must use the same driver streams as the game noise");
  }
}

FiniteGameSpec build_from_graph(const KernelGrid& A_tilde, const KernelGrid& B_tilde,
                                double lambda, const Eigen::MatrixXd& w,
                                const NoiseModel& noise) {
  require(A_tilde.n == 1 && B_tilde.n == 1, "graph game: A and B kernels must be scalar");
  require(A_tilde.grid == B_tilde.grid, "graph game: A and B kernels must share the grid");
  require(A_tilde.is_volterra && B_tilde.is_volterra, "graph game: kernels must be Volterra");
  require(lambda > 0.0, "graph game: lambda must be positive");
  const int N = static_cast<int>(w.rows());
  require(w.cols() == N && N >= 1, "graph game: weight matrix must be square");
  require(w.allFinite(), "graph game: weight matrix must be finite");
  for (int i = 0; i < N; ++i) {
    require(w(i, i) == 0.0, "graph game: weight matrix must have zero diagonal");
    for (int j = 0; j < N; ++j) {
      require(w(i, j) == w(j, i), "graph game: weight matrix must be symmetric");
      require(w(i, j) >= 0.0, "graph game: weight matrix entries must be nonnegative");
    }
  }
  require(noise.dim == N && noise.grid == A_tilde.grid,
          "graph game: noise must have one coordinate per vertex on the kernel grid");

  FiniteGameSpec spec;
  spec.grid = A_tilde.grid;
  spec.N = N;
  spec.lambda.assign(N, lambda);
  spec.noise = noise;
  spec.graph_w = w;

  KernelGrid B = zero_kernel(spec.grid, N);
  for (int j = 0; j < spec.grid.n_t; ++j)
    for (int k = 0; k < j; ++k) {
      const double a = A_tilde.at(j, k)(0, 0);
      const double b = B_tilde.at(j, k)(0, 0);
      Eigen::MatrixXd blk = (b / N) * w;
      blk.diagonal().array() += a;
      B.at(j, k) = blk;
    }
  spec.B = B;
  spec.Bbar = B;  // symmetric w: Bbar^{ij} = Id A + (w_ij/N) B equals B^{ij}
  spec.validate();
  return spec;
}

EquilibriumOperator::EquilibriumOperator(const FiniteGameSpec& spec, double coercivity_tol)
    : spec_(spec) {
  spec_.validate();
  const int N = spec_.N;
  nn_ = N * spec_.grid.n_t;
  mb_ = kernel_to_operator(spec_.B).m;
  mbbar_t_ = kernel_to_operator(spec_.Bbar).m.transpose();

  OperatorMatrix interaction;
  interaction.grid = spec_.grid;
  interaction.n = N;
  interaction.is_volterra = false;
  interaction.m = mb_ + mbbar_t_;
  coercivity_ = coercivity_check(interaction, spec_.lambda, coercivity_tol);
  if (!coercivity_.passed)
    throw assumption_error("equilibrium operator: coercivity check failed (c0 estimate " +
                           std::to_string(coercivity_.c0_estimate) + "); " + coercivity_.note);

  dense_ = interaction.m;
  for (int j = 0; j < spec_.grid.n_t; ++j)
    for (int i = 0; i < N; ++i)
      dense_(static_cast<Eigen::Index>(j) * N + i, static_cast<Eigen::Index>(j) * N + i) +=
          2.0 * spec_.lambda[i];

  precompute();
}

void EquilibriumOperator::precompute() {
  const int N = spec_.N;
  const int n_t = spec_.grid.n_t;

  iplus_e_ = Eigen::MatrixXd::Identity(nn_, nn_);
  q_.assign(n_t, Eigen::MatrixXd());
  head_lu_.assign(n_t, Eigen::PartialPivLU<Eigen::MatrixXd>());

  Eigen::VectorXd two_lambda(N);
  for (int i = 0; i < N; ++i) two_lambda[i] = 2.0 * spec_.lambda[i];

  for (int j = 0; j < n_t; ++j) {
    const int m = n_t - 1 - j;  // number of future nodes
    Eigen::MatrixXd head = Eigen::MatrixXd::Zero(N, N);
    head.diagonal() = two_lambda;

    if (m > 0) {
      const Eigen::Index r0 = static_cast<Eigen::Index>(j + 1) * N;
      const Eigen::Index sz = static_cast<Eigen::Index>(m) * N;
      Eigen::PartialPivLU<Eigen::MatrixXd> lu(dense_.block(r0, r0, sz, sz));
      const Eigen::MatrixXd p = mbbar_t_.block(static_cast<Eigen::Index>(j) * N, r0, N, sz);
      // Q_j = P_j D_j^{-1} through the transposed factorization (materialized
      // before the final transpose so the solver-transpose assignment applies).
      Eigen::MatrixXd qt = lu.transpose().solve(p.transpose());
      q_[j] = qt.transpose();
      head.noalias() -= q_[j] * mb_.block(r0, static_cast<Eigen::Index>(j) * N, sz, N);
    }
    head_lu_[j] = Eigen::PartialPivLU<Eigen::MatrixXd>(head);

    if (j > 0) {
      const Eigen::Index cols = static_cast<Eigen::Index>(j) * N;
      Eigen::MatrixXd row = mb_.block(static_cast<Eigen::Index>(j) * N, 0, N, cols);
      if (m > 0) {
        const Eigen::Index r0 = static_cast<Eigen::Index>(j + 1) * N;
        row.noalias() -= q_[j] * mb_.block(r0, 0, static_cast<Eigen::Index>(m) * N, cols);
      }
      iplus_e_.block(static_cast<Eigen::Index>(j) * N, 0, N, cols) = head_lu_[j].solve(row);
    }
  }

  gamma_model_ = transform_gamma(spec_.noise);

  if (!iplus_e_.allFinite() || !gamma_model_.drift.allFinite())
    throw numeric_error("equilibrium operator: non-finite values in precompute");
  for (const auto& L : gamma_model_.loadings)
    if (!L.allFinite()) throw numeric_error("equilibrium operator: non-finite gamma loadings");

  iplus_e_lu_ = Eigen::PartialPivLU<Eigen::MatrixXd>(iplus_e_);
}

NoiseModel EquilibriumOperator::transform_gamma(const NoiseModel& input) const {
  const int N = spec_.N;
  const int n_t = spec_.grid.n_t;
  require(input.grid == spec_.grid, "transform_gamma: input grid must match the game grid");
  require(input.dim > 0 && input.dim % N == 0,
          "transform_gamma: input dim must be a positive multiple of N");
  const int n_groups = input.dim / N;

  NoiseModel out = input;
  auto apply = [&](const Eigen::MatrixXd& coeffs) {
    Eigen::MatrixXd result(coeffs.rows(), coeffs.cols());
    for (int g = 0; g < n_groups; ++g) {
      const Eigen::MatrixXd panel = coeffs.middleRows(static_cast<Eigen::Index>(g) * N, N);
      const Eigen::VectorXd v = flatten(panel);
      Eigen::MatrixXd transformed(N, n_t);
      for (int j = 0; j < n_t; ++j) {
        const int m = n_t - 1 - j;
        Eigen::VectorXd rhs = v.segment(static_cast<Eigen::Index>(j) * N, N);
        if (m > 0)
          rhs.noalias() -= q_[j] * v.segment(static_cast<Eigen::Index>(j + 1) * N,
                                             static_cast<Eigen::Index>(m) * N);
        transformed.col(j) = head_lu_[j].solve(rhs);
      }
      result.middleRows(static_cast<Eigen::Index>(g) * N, N) = transformed;
    }
    return result;
  };
  out.drift = apply(input.drift);
  for (auto& L : out.loadings) L = apply(L);
  return out;
}

Eigen::MatrixXd EquilibriumOperator::gamma_path(const Eigen::MatrixXd& drivers) const {
  return realize(gamma_model_, drivers);
}

Eigen::MatrixXd EquilibriumOperator::solve_path(const Eigen::MatrixXd& drivers) const {
  Eigen::VectorXd g = flatten(gamma_path(drivers));
  iplus_e_.triangularView<Eigen::UnitLower>().solveInPlace(g);
  return unflatten(g, spec_.N, spec_.grid.n_t);
}

Eigen::MatrixXd EquilibriumOperator::solve_path_lu(const Eigen::MatrixXd& drivers) const {
  Eigen::VectorXd g = flatten(gamma_path(drivers));
  Eigen::VectorXd a = iplus_e_lu_.solve(g);
  return unflatten(a, spec_.N, spec_.grid.n_t);
}

double EquilibriumOperator::lu_forward_diff(const Eigen::MatrixXd& drivers) const {
  return (solve_path(drivers) - solve_path_lu(drivers)).cwiseAbs().maxCoeff();
}

double EquilibriumOperator::foc_residual(const Eigen::MatrixXd& drivers,
                                         const Eigen::MatrixXd& alpha) const {
  const int N = spec_.N;
  const int n_t = spec_.grid.n_t;
  const int S = spec_.noise.total_streams();

  const Eigen::MatrixXd b = realize(spec_.noise, drivers);
  const Eigen::VectorXd a = flatten(alpha);
  const Eigen::VectorXd past = mb_ * a;  // strictly lower: (B a)(t_j) uses k < j

  // Stacked noise coefficients for conditional future values.
  Eigen::VectorXd drift_flat = flatten(spec_.noise.drift);
  Eigen::MatrixXd load_flat(nn_, S);
  for (int s = 0; s < S; ++s) load_flat.col(s) = flatten(spec_.noise.loadings[s]);

  // Running prefix convolution z(l) = sum_{k <= j} M_B[l,k] alpha_k, kept for
  // future rows only.
  Eigen::VectorXd z = Eigen::VectorXd::Zero(nn_);
  double worst = 0.0;
  for (int j = 0; j < n_t; ++j) {
    const int m = n_t - 1 - j;
    const Eigen::Index r0 = static_cast<Eigen::Index>(j + 1) * N;
    const Eigen::Index sz = static_cast<Eigen::Index>(m) * N;
    if (m > 0)
      z.segment(r0, sz).noalias() +=
          mb_.block(r0, static_cast<Eigen::Index>(j) * N, sz, N) * alpha.col(j);

    Eigen::VectorXd r(N);
    for (int i = 0; i < N; ++i) r[i] = 2.0 * spec_.lambda[i] * alpha(i, j);
    r -= b.col(j);
    r += past.segment(static_cast<Eigen::Index>(j) * N, N);
    if (m > 0) {
      // Conditional future input E_{t_j}[b] on (t_j, T], then the future-block
      // solve is already folded into Q_j.
      Eigen::VectorXd fut = drift_flat.segment(r0, sz);
      fut.noalias() += load_flat.middleRows(r0, sz) * drivers.col(j);
      fut -= z.segment(r0, sz);
      r.noalias() += q_[j] * fut;
    }
    worst = std::max(worst, r.cwiseAbs().maxCoeff());
  }
  return worst;
}

double EquilibriumOperator::foc_residual_affine(const NoiseModel& candidate,
                                                const Eigen::MatrixXd& drivers) const {
  require(candidate.grid == spec_.grid && candidate.dim == spec_.N,
          "foc_residual_affine: candidate must be an N-dim model on the game grid");
  require(same_stream_structure(candidate, spec_.noise),
          "foc_residual_affine: candidate must use the game's driver streams");
  const int N = spec_.N;
  const int n_t = spec_.grid.n_t;
  const Eigen::MatrixXd b = realize(spec_.noise, drivers);
  const Eigen::MatrixXd a = realize(candidate, drivers);
  const Eigen::VectorXd af = flatten(a);
  const Eigen::VectorXd past = mb_ * af;

  double worst = 0.0;
  for (int j = 0; j < n_t; ++j) {
    const Eigen::MatrixXd cond = conditional_expectation(candidate, drivers, j);
    const Eigen::VectorXd condf = flatten(cond);
    Eigen::VectorXd r(N);
    for (int i = 0; i < N; ++i) r[i] = 2.0 * spec_.lambda[i] * a(i, j);
    r -= b.col(j);
    r += past.segment(static_cast<Eigen::Index>(j) * N, N);
    // Future coupling with the candidate's own conditional continuation
    // (rows of Bbar^* vanish at or before t_j, so the realized prefix of
    // condf carries no weight).
    r.noalias() += mbbar_t_.middleRows(static_cast<Eigen::Index>(j) * N, N) * condf;
    worst = std::max(worst, r.cwiseAbs().maxCoeff());
  }
  return worst;
}

Eigen::MatrixXd EquilibriumOperator::conditional_control(const Eigen::MatrixXd& drivers,
                                                         int t_index) const {
  Eigen::VectorXd g = flatten(conditional_expectation(gamma_model_, drivers, t_index));
  iplus_e_.triangularView<Eigen::UnitLower>().solveInPlace(g);
  return unflatten(g, spec_.N, spec_.grid.n_t);
}

EquilibriumResult solve_equilibrium(const EquilibriumOperator& op,
                                    const std::vector<NoisePath>& paths, double tol,
                                    int threads) {
  const auto t0 = std::chrono::steady_clock::now();
  const FiniteGameSpec& spec = op.spec();
  EquilibriumResult res;
  res.grid = spec.grid;
  res.N = spec.N;
  res.diag.c0_estimate = op.coercivity().c0_estimate;
  res.diag.coercivity_passed = op.coercivity().passed;
  res.diag.coercivity_borderline = op.coercivity().borderline;
  res.diag.tol = tol;
  res.diag.sup_slice_B = kernel_sup_slice_norm(spec.B);
  res.diag.sup_slice_Bbar = kernel_sup_slice_norm(spec.Bbar);
  res.diag.precompute_seconds = seconds_since(t0);

  const int P = static_cast<int>(paths.size());
  res.alpha.assign(P, Eigen::MatrixXd());
  res.gamma.assign(P, Eigen::MatrixXd());
  std::vector<double> residual(P, 0.0), bsup(P, 0.0), ludiff(P, 0.0), gsup(P, 0.0);

  const auto t1 = std::chrono::steady_clock::now();
  const int check_lu = std::min(P, 8);
  parallel_for(P, threads, [&](int p) {
    res.gamma[p] = op.gamma_path(paths[p].drivers);
    res.alpha[p] = op.solve_path(paths[p].drivers);
    residual[p] = op.foc_residual(paths[p].drivers, res.alpha[p]);
    bsup[p] = paths[p].realized.size() ? paths[p].realized.cwiseAbs().maxCoeff() : 0.0;
    gsup[p] = res.gamma[p].size() ? res.gamma[p].cwiseAbs().maxCoeff() : 0.0;
    if (p < check_lu) ludiff[p] = op.lu_forward_diff(paths[p].drivers);
  });
  res.diag.paths_seconds = seconds_since(t1);

  double scale = 1.0, worst = 0.0, mean = 0.0, worst_lu = 0.0, worst_g = 0.0;
  int worst_path = -1;
  for (int p = 0; p < P; ++p) {
    scale = std::max(scale, 1.0 + bsup[p]);
    mean += residual[p];
    worst_lu = std::max(worst_lu, ludiff[p]);
    worst_g = std::max(worst_g, gsup[p]);
    if (residual[p] > worst) {
      worst = residual[p];
      worst_path = p;
    }
    if (!res.alpha[p].allFinite())
      throw numeric_error("solve: non-finite control on path id " +
                          std::to_string(paths[p].path_id));
  }
  res.diag.max_foc_residual = worst;
  res.diag.mean_foc_residual = P > 0 ? mean / P : 0.0;
  res.diag.residual_scale = scale;
  res.diag.lu_forward_max_diff = worst_lu;

  if (worst > tol * scale)
    throw solver_error("solve: first-order-condition residual " + std::to_string(worst) +
                       " exceeds tolerance " + std::to_string(tol * scale) + " on path id " +
                       std::to_string(worst_path >= 0 ? paths[worst_path].path_id : -1));
  if (worst_lu > 1e-10 * (1.0 + worst_g))
    throw solver_error("solve: LU and forward-substitution solves disagree by " +
                       std::to_string(worst_lu));
  return res;
}

EquilibriumResult solve_equilibrium(const FiniteGameSpec& spec,
                                    const std::vector<NoisePath>& paths, double tol,
                                    int threads) {
  EquilibriumOperator op(spec);
  return solve_equilibrium(op, paths, tol, threads);
}

double objective_value(const EquilibriumOperator& op, int player, const Eigen::MatrixXd& alpha,
                       const NoisePath& path, double c_offset) {
  const FiniteGameSpec& spec = op.spec();
  const int N = spec.N;
  const int n_t = spec.grid.n_t;
  const double dt = spec.grid.dt;
  require(player >= 0 && player < N, "objective: player index out of range");
  require(alpha.rows() == N && alpha.cols() == n_t, "objective: control profile shape mismatch");

  const Eigen::VectorXd a = flatten(alpha);
  const Eigen::VectorXd ai = alpha.row(player).transpose();

  // -lambda <a^i, a^i>
  double val = -spec.lambda[player] * dt * ai.squaredNorm();

  // -<a^i, (B a)^i>
  const Eigen::VectorXd ba = op.b_operator() * a;
  double row_term = 0.0;
  for (int j = 0; j < n_t; ++j) row_term += alpha(player, j) * ba[static_cast<Eigen::Index>(j) * N + player];
  val -= dt * row_term;

  // -sum_{j != i} <a^j, (Bbar e_i a^i)^j>
  Eigen::VectorXd embed = Eigen::VectorXd::Zero(a.size());
  for (int j = 0; j < n_t; ++j) embed[static_cast<Eigen::Index>(j) * N + player] = alpha(player, j);
  const Eigen::VectorXd bbar_embed = op.bbar_adjoint_operator().transpose() * embed;
  double col_term = a.dot(bbar_embed);
  for (int j = 0; j < n_t; ++j)
    col_term -= alpha(player, j) * bbar_embed[static_cast<Eigen::Index>(j) * N + player];
  val -= dt * col_term;

  // Cross C kernels (objective only).
  for (const auto& ck : spec.c_kernels) {
    if (ck.i != player) continue;
    const Eigen::MatrixXd cv = scalar_kernel_values(ck.kernel);
    const Eigen::VectorXd aj = alpha.row(ck.j).transpose();
    const Eigen::VectorXd ak = alpha.row(ck.k).transpose();
    val -= dt * dt * aj.dot(cv * ak);
  }

  // Graph aggregate terms.
  if (spec.graph_w) {
    Eigen::VectorXd wrow = spec.graph_w->row(player).transpose() / static_cast<double>(N);
    Eigen::VectorXd abar = alpha.transpose() * wrow;  // n_t vector
    if (spec.graph_C) {
      const Eigen::MatrixXd cv = scalar_kernel_values(*spec.graph_C);
      val -= dt * dt * abar.dot(cv * abar);
    }
    if (spec.graph_b_star) {
      const Eigen::MatrixXd bs = realize(*spec.graph_b_star, path.drivers);
      val += dt * bs.row(0).dot(abar.transpose());
    }
  }

  // + <b^i, a>
  val += dt * path.realized.row(player).dot(alpha.row(player));
  if (spec.cross_b) {
    const Eigen::MatrixXd bc = realize(*spec.cross_b, path.drivers);
    for (int j = 0; j < N; ++j) {
      if (j == player) continue;
      val += dt * bc.row(static_cast<Eigen::Index>(player) * N + j).dot(alpha.row(j));
    }
  }
  return val + c_offset;
}

NashGapReport nash_gap(const EquilibriumOperator& op, const EquilibriumResult& eq,
                       const std::vector<NoisePath>& paths, int n_probe, double eps,
                       std::uint64_t seed) {
  const FiniteGameSpec& spec = op.spec();
  const int N = spec.N;
  const int n_t = spec.grid.n_t;
  const int S = spec.noise.total_streams();
  const int P = static_cast<int>(paths.size());
  require(P > 0 && static_cast<int>(eq.alpha.size()) == P,
          "nash_gap: equilibrium result must cover the path ensemble");
  require(n_probe > 0 && eps > 0.0, "nash_gap: need positive probe count and step");

  NashGapReport rep;
  rep.gaps.resize(2 * n_probe);
  rep.stderrs.resize(2 * n_probe);
  rep.paired_max = -std::numeric_limits<double>::infinity();
  rep.max_gap = -std::numeric_limits<double>::infinity();

  for (int probe = 0; probe < n_probe; ++probe) {
    const int player = probe % N;
    // Adapted probe: polynomial drift plus constant loadings on the game's
    // own driver streams.
    NoiseModel eta = spec.noise;
    eta.dim = 1;
    eta.drift.resize(1, n_t);
    const double c0 = inv_normal_cdf(u01_from_bits(rng_key(seed, probe, 0, 0, 0)));
    const double c1 = inv_normal_cdf(u01_from_bits(rng_key(seed, probe, 0, 0, 1)));
    const double c2 = inv_normal_cdf(u01_from_bits(rng_key(seed, probe, 0, 0, 2)));
    for (int j = 0; j < n_t; ++j) {
      const double t = spec.grid.t[j];
      eta.drift(0, j) = c0 + c1 * t + c2 * t * t;
    }
    eta.loadings.assign(S, Eigen::MatrixXd(1, n_t));
    for (int s = 0; s < S; ++s) {
      const double d = 0.5 * inv_normal_cdf(u01_from_bits(rng_key(seed, probe, 1, s, 0)));
      eta.loadings[s].setConstant(d);
    }

    double sum_p = 0.0, sq_p = 0.0, sum_m = 0.0, sq_m = 0.0;
    for (int p = 0; p < P; ++p) {
      const Eigen::MatrixXd eta_path = realize(eta, paths[p].drivers);  // 1 x n_t
      const double j_eq = objective_value(op, player, eq.alpha[p], paths[p]);
      Eigen::MatrixXd dev = eq.alpha[p];
      dev.row(player) += eps * eta_path.row(0);
      const double j_plus = objective_value(op, player, dev, paths[p]);
      dev.row(player) -= 2.0 * eps * eta_path.row(0);
      const double j_minus = objective_value(op, player, dev, paths[p]);

      const double gp = j_plus - j_eq;
      const double gm = j_minus - j_eq;
      sum_p += gp;
      sq_p += gp * gp;
      sum_m += gm;
      sq_m += gm * gm;
      rep.paired_max = std::max(rep.paired_max, gp + gm);
    }
    auto finish = [&](double sum, double sq, int slot) {
      const double mean = sum / P;
      const double var = std::max(0.0, sq / P - mean * mean);
      rep.gaps[slot] = mean;
      rep.stderrs[slot] = P > 1 ? std::sqrt(var / (P - 1)) : 0.0;
      if (mean > rep.max_gap) {
        rep.max_gap = mean;
        rep.max_gap_stderr = rep.stderrs[slot];
        rep.argmax_probe = slot;
      }
    };
    finish(sum_p, sq_p, 2 * probe);
    finish(sum_m, sq_m, 2 * probe + 1);
  }
  return rep;
}

}  // namespace fredholm
