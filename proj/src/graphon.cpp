#include "fredholm/graphon.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "fredholm/errors.hpp"
#include "fredholm/threading.hpp"

namespace fredholm {

namespace {

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
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

// A + theta * B blockwise (scalar kernels on a common grid).
KernelGrid add_scaled(const KernelGrid& a, const KernelGrid& b, double theta) {
  KernelGrid out = a;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += theta * b.values[i];
  return out;
}

// Scalar game with kernel K = A + theta B paired with the given dim-1 noise.
FiniteGameSpec scalar_game(const GraphonGameSpec& g, double theta, NoiseModel noise) {
  FiniteGameSpec s;
  s.grid = g.grid;
  s.N = 1;
  s.lambda = {g.lambda};
  s.B = add_scaled(g.A_tilde, g.B_tilde, theta);
  s.Bbar = s.B;
  s.noise = std::move(noise);
  return s;
}

}  // namespace

void GraphonGrid::validate() const {
  require(n_u >= 1, "graphon: n_u must be at least 1");
  require(values.rows() == n_u && values.cols() == n_u,
          "graphon: values must be n_u x n_u");
  for (int j = 0; j < n_u; ++j)
    for (int k = 0; k < n_u; ++k) {
      require(values(j, k) == values(k, j), "graphon: values must be symmetric");
      require(values(j, k) >= 0.0 && values(j, k) <= 1.0,
              "graphon: values must lie in [0, 1]");
    }
}

GraphonGrid graphon_from_fn(int n_u, const std::function<double(double, double)>& fn) {
  GraphonGrid g;
  g.n_u = n_u;
  g.values.resize(n_u, n_u);
  for (int j = 0; j < n_u; ++j)
    for (int k = j; k < n_u; ++k) {
      const double v = fn(g.label(j), g.label(k));
      g.values(j, k) = v;
      g.values(k, j) = v;
    }
  g.validate();
  return g;
}

SpectralModes spectral_decompose(const GraphonGrid& w, double energy_tol, int max_rank) {
  w.validate();
  const int n_u = w.n_u;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(w.values / static_cast<double>(n_u));
  require(eig.info() == Eigen::Success, "graphon: eigendecomposition failed");
  const Eigen::VectorXd ev = eig.eigenvalues();  // ascending

  SpectralModes m;
  m.n_u = n_u;
  m.energy_total = ev.squaredNorm();

  // Drop smallest |theta| first while the discarded energy stays strictly
  // below the budget (so energy_tol = 0 keeps every mode, even exact zeros),
  // then keep dropping until the rank cap is met.
  std::vector<int> by_abs(n_u);
  std::iota(by_abs.begin(), by_abs.end(), 0);
  std::sort(by_abs.begin(), by_abs.end(),
            [&](int a, int b) { return std::abs(ev[a]) < std::abs(ev[b]); });
  const double budget = energy_tol * m.energy_total;
  int dropped = 0;
  double discarded = 0.0;
  while (dropped < n_u && discarded + ev[by_abs[dropped]] * ev[by_abs[dropped]] < budget) {
    discarded += ev[by_abs[dropped]] * ev[by_abs[dropped]];
    ++dropped;
  }
  if (max_rank >= 0)
    while (n_u - dropped > max_rank) {
      discarded += ev[by_abs[dropped]] * ev[by_abs[dropped]];
      ++dropped;
    }
  m.truncation_energy = discarded;
  m.rank = n_u - dropped;

  // Kept modes ordered by signed eigenvalue, descending.
  std::vector<int> kept(by_abs.begin() + dropped, by_abs.end());
  std::sort(kept.begin(), kept.end(), [&](int a, int b) { return ev[a] > ev[b]; });
  m.theta.resize(m.rank);
  m.phi.resize(n_u, m.rank);
  const double scale = std::sqrt(static_cast<double>(n_u));
  for (int i = 0; i < m.rank; ++i) {
    m.theta[i] = ev[kept[i]];
    m.phi.col(i) = scale * eig.eigenvectors().col(kept[i]);
  }
  m.energy_order.resize(m.rank);
  std::iota(m.energy_order.begin(), m.energy_order.end(), 0);
  std::sort(m.energy_order.begin(), m.energy_order.end(), [&](int a, int b) {
    return std::abs(m.theta[a]) > std::abs(m.theta[b]);
  });
  return m;
}

void GraphonGameSpec::validate() const {
  require(grid.n_t >= 2 && static_cast<int>(grid.t.size()) == grid.n_t,
          "graphon game: invalid time grid");
  require(lambda > 0.0, "graphon game: lambda must be positive");
  require(A_tilde.grid == grid && A_tilde.n == 1 && A_tilde.is_volterra,
          "graphon game: A_tilde must be a scalar Volterra kernel on the game grid");
  require(B_tilde.grid == grid && B_tilde.n == 1 && B_tilde.is_volterra,
          "graphon game: B_tilde must be a scalar Volterra kernel on the game grid");
  graphon.validate();
  require(noise.grid == grid && noise.dim == graphon.n_u,
          "graphon game: noise must be label-indexed with dim n_u on the game grid");
  noise.validate();
  if (C_tilde)
    require(C_tilde->grid == grid && C_tilde->n == 1 && C_tilde->is_volterra,
            "graphon game: C_tilde must be a scalar Volterra kernel on the game grid");
  if (b_star) {
    require(b_star->grid == grid && b_star->dim == 1,
            "graphon game: b_star must be scalar on the game grid");
    require(same_stream_structure(*b_star, noise),
            "graphon game: b_star must share the noise driver streams");
    b_star->validate();
  }
}

GraphonCoercivityReport coercivity_check_graphon(const GraphonGameSpec& spec,
                                                 const SpectralModes& modes, double tol) {
  const Eigen::MatrixXd ma = kernel_to_operator(spec.A_tilde).m;
  const Eigen::MatrixXd mb = kernel_to_operator(spec.B_tilde).m;
  const Eigen::MatrixXd sym_a = 0.5 * (ma + ma.transpose());
  const Eigen::MatrixXd sym_b = 0.5 * (mb + mb.transpose());

  GraphonCoercivityReport rep;
  {
    // The Volterra grid stores no diagonal values, which perturbs the
    // symmetrized quadratic form by at most dt * sup |A| relative to the
    // continuum one, so nonnegative definiteness is checked to that width.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym_a, Eigen::EigenvaluesOnly);
    const double a_min = eig.eigenvalues().minCoeff();
    rep.a_psd = a_min >= -spec.grid.dt * (1.0 + kernel_sup_norm(spec.A_tilde));
    if (!rep.a_psd) rep.note = "symmetrized A_tilde operator has a negative eigenvalue";
  }

  std::vector<double> thetas(modes.theta.data(), modes.theta.data() + modes.rank);
  std::vector<int> labels(modes.rank);
  std::iota(labels.begin(), labels.end(), 0);
  if (modes.rank < modes.n_u) {  // the complement solves the theta = 0 equation
    thetas.push_back(0.0);
    labels.push_back(-1);
  }
  rep.c_w_raw = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    Eigen::MatrixXd form = sym_a + thetas[i] * sym_b;
    form.diagonal().array() += spec.lambda;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(form, Eigen::EigenvaluesOnly);
    const double c = eig.eigenvalues().minCoeff();
    if (c < rep.c_w_raw) {
      rep.c_w_raw = c;
      rep.argmin_mode = labels[i];
    }
  }
  if (thetas.empty()) {
    rep.c_w_raw = spec.lambda;
    rep.argmin_mode = -1;
  }

  rep.clamped = rep.c_w_raw > spec.lambda;
  rep.c_w = std::min(rep.c_w_raw, spec.lambda);
  rep.passed = rep.a_psd && rep.c_w_raw > tol;
  if (rep.passed && rep.note.empty() && rep.clamped)
    rep.note = "c_w clamped to lambda for per-node solvability";
  return rep;
}

NoiseModel mode_noise(const NoiseModel& label_noise, const SpectralModes& modes) {
  require(label_noise.dim == modes.n_u, "mode_noise: label noise dim must equal n_u");
  return linear_map(label_noise, modes.phi.transpose() / static_cast<double>(modes.n_u));
}

NoiseModel complement_noise(const NoiseModel& label_noise, const SpectralModes& modes) {
  require(label_noise.dim == modes.n_u, "complement_noise: label noise dim must equal n_u");
  const Eigen::MatrixXd proj =
      Eigen::MatrixXd::Identity(modes.n_u, modes.n_u) -
      modes.phi * modes.phi.transpose() / static_cast<double>(modes.n_u);
  return linear_map(label_noise, proj);
}

Eigen::MatrixXd reconstruct(const SpectralModes& modes, const Eigen::MatrixXd& mode_controls) {
  require(mode_controls.rows() == modes.rank,
          "reconstruct: mode controls must have one row per kept mode");
  return modes.phi * mode_controls;
}

GraphonSolver::GraphonSolver(const GraphonGameSpec& spec, double energy_tol, int max_rank,
                             double coercivity_tol)
    : spec_(spec) {
  const auto t0 = std::chrono::steady_clock::now();
  spec_.validate();
  modes_ = spectral_decompose(spec_.graphon, energy_tol, max_rank);
  coercivity_ = coercivity_check_graphon(spec_, modes_, coercivity_tol);
  if (!coercivity_.passed)
    throw assumption_error(
        "graphon game: coercivity check failed (c_w_raw = " + std::to_string(coercivity_.c_w_raw) +
        (coercivity_.a_psd ? ")" : ", A_tilde not nonnegative definite)"));

  const int n_u = spec_.graphon.n_u;
  mode_noise_ = mode_noise(spec_.noise, modes_);
  mode_ops_.reserve(modes_.rank);
  for (int i = 0; i < modes_.rank; ++i) {
    NoiseModel ni =
        linear_map(spec_.noise, modes_.phi.col(i).transpose() / static_cast<double>(n_u));
    mode_ops_.emplace_back(scalar_game(spec_, modes_.theta[i], std::move(ni)),
                           coercivity_tol);
  }
  if (modes_.rank < n_u) {
    NoiseModel probe_noise = linear_map(spec_.noise, Eigen::MatrixXd::Zero(1, n_u));
    complement_op_ = std::make_unique<EquilibriumOperator>(
        scalar_game(spec_, 0.0, std::move(probe_noise)), coercivity_tol);
    complement_gamma_ = complement_op_->transform_gamma(complement_noise(spec_.noise, modes_));
  }

  ma_ = kernel_to_operator(spec_.A_tilde).m;
  mb_ = kernel_to_operator(spec_.B_tilde).m;
  w_over_n_ = spec_.graphon.values / static_cast<double>(n_u);

  // Admissibility surrogate: C_E from the per-mode resolvent kernels
  // (operator entries carry one dt), C_gamma from the deterministic-input
  // amplification of the gamma transform (probe: one unit impulse per node).
  const int n_t = spec_.grid.n_t;
  const double dt = spec_.grid.dt;
  double c_e = 0.0;
  double c_gamma = 0.0;
  NoiseModel probe;
  probe.grid = spec_.grid;
  probe.dim = n_t;
  probe.drift = Eigen::MatrixXd::Identity(n_t, n_t);
  auto account = [&](const EquilibriumOperator& op) {
    const Eigen::MatrixXd e = op.resolvent_matrix() - Eigen::MatrixXd::Identity(n_t, n_t);
    c_e = std::max(c_e, e.rowwise().squaredNorm().maxCoeff() / dt);
    const Eigen::MatrixXd g = op.transform_gamma(probe).drift.transpose();
    const double gnorm = g.operatorNorm();
    c_gamma = std::max(c_gamma, gnorm * gnorm);
  };
  for (const auto& op : mode_ops_) account(op);
  if (complement_op_) account(*complement_op_);
  const double T = spec_.grid.T;
  admissibility_constant_ = (2.0 + 4.0 * c_e * T * std::exp(2.0 * c_e * T)) * c_gamma;

  precompute_seconds_ = seconds_since(t0);
}

const EquilibriumOperator& GraphonSolver::mode_operator(int i) const {
  require(i >= 0 && i < modes_.rank, "graphon solver: mode index out of range");
  return mode_ops_[static_cast<std::size_t>(i)];
}

const EquilibriumOperator& GraphonSolver::complement_operator() const {
  require(complement_op_ != nullptr, "graphon solver: complement inactive at full rank");
  return *complement_op_;
}

Eigen::MatrixXd GraphonSolver::mode_controls(const Eigen::MatrixXd& drivers) const {
  Eigen::MatrixXd controls(modes_.rank, spec_.grid.n_t);
  for (int i = 0; i < modes_.rank; ++i)
    controls.row(i) = mode_ops_[static_cast<std::size_t>(i)].solve_path(drivers);
  return controls;
}

Eigen::MatrixXd GraphonSolver::complement_field(const Eigen::MatrixXd& drivers) const {
  if (!complement_op_)
    return Eigen::MatrixXd::Zero(spec_.graphon.n_u, spec_.grid.n_t);
  const Eigen::MatrixXd gammas = realize(complement_gamma_, drivers);
  Eigen::MatrixXd solved = complement_op_->resolvent_matrix()
                               .triangularView<Eigen::UnitLower>()
                               .solve(gammas.transpose());
  return solved.transpose();
}

Eigen::MatrixXd GraphonSolver::field(const Eigen::MatrixXd& drivers) const {
  Eigen::MatrixXd f = modes_.phi * mode_controls(drivers);
  if (complement_op_) f += complement_field(drivers);
  return f;
}

Eigen::MatrixXd GraphonSolver::conditional_field(const Eigen::MatrixXd& drivers,
                                                 int t_index) const {
  Eigen::MatrixXd cond(modes_.rank, spec_.grid.n_t);
  for (int i = 0; i < modes_.rank; ++i)
    cond.row(i) = mode_ops_[static_cast<std::size_t>(i)].conditional_control(drivers, t_index);
  Eigen::MatrixXd f = modes_.phi * cond;
  if (complement_op_) {
    const Eigen::MatrixXd cg = conditional_expectation(complement_gamma_, drivers, t_index);
    Eigen::MatrixXd solved = complement_op_->resolvent_matrix()
                                 .triangularView<Eigen::UnitLower>()
                                 .solve(cg.transpose());
    f += solved.transpose();
  }
  return f;
}

double GraphonSolver::foc_residual(const Eigen::MatrixXd& drivers,
                                   const Eigen::MatrixXd& field) const {
  const int n_u = spec_.graphon.n_u;
  const int n_t = spec_.grid.n_t;
  require(field.rows() == n_u && field.cols() == n_t,
          "graphon foc: field must be n_u x n_t");

  const Eigen::MatrixXd b = realize(spec_.noise, drivers);
  const Eigen::MatrixXd wf = w_over_n_ * field;
  double worst = 0.0;
  for (int j = 0; j < n_t; ++j) {
    Eigen::VectorXd r = 2.0 * spec_.lambda * field.col(j) - b.col(j);
    if (j > 0) {
      r.noalias() += field.leftCols(j) * ma_.row(j).head(j).transpose();
      r.noalias() += wf.leftCols(j) * mb_.row(j).head(j).transpose();
    }
    const int m = n_t - 1 - j;
    if (m > 0) {
      const Eigen::MatrixXd ef = conditional_field(drivers, j).rightCols(m);
      r.noalias() += ef * ma_.col(j).tail(m);
      r.noalias() += (w_over_n_ * ef) * mb_.col(j).tail(m);
    }
    worst = std::max(worst, r.cwiseAbs().maxCoeff());
  }
  return worst;
}

GraphonEquilibrium solve_graphon(const GraphonGameSpec& spec, const std::vector<NoisePath>& paths,
                                 double tol, double energy_tol, int max_rank, int threads) {
  GraphonSolver solver(spec, energy_tol, max_rank);
  const auto t0 = std::chrono::steady_clock::now();
  const int n_paths = static_cast<int>(paths.size());
  const bool full_rank = !solver.complement_active();

  GraphonEquilibrium out;
  out.grid = spec.grid;
  out.n_u = spec.graphon.n_u;
  out.modes = solver.modes();
  out.mode_controls.resize(paths.size());
  out.fields.resize(paths.size());

  std::vector<double> resid(paths.size(), 0.0);
  std::vector<double> mode_resid(paths.size(), 0.0);
  std::vector<double> bsup(paths.size(), 0.0);
  std::vector<double> fsup(paths.size(), 0.0);
  std::vector<double> f_l2(paths.size(), 0.0);
  std::vector<double> b_l2(paths.size(), 0.0);
  parallel_for(n_paths, threads, [&](int p) {
    const Eigen::MatrixXd& drivers = paths[static_cast<std::size_t>(p)].drivers;
    Eigen::MatrixXd controls = solver.mode_controls(drivers);
    Eigen::MatrixXd f = reconstruct(solver.modes(), controls);
    if (solver.complement_active()) f += solver.complement_field(drivers);
    resid[static_cast<std::size_t>(p)] = solver.foc_residual(drivers, f);
    double mr = 0.0;
    for (int i = 0; i < solver.rank(); ++i)
      mr = std::max(mr, solver.mode_operator(i).foc_residual(drivers, controls.row(i)));
    mode_resid[static_cast<std::size_t>(p)] = mr;
    const Eigen::MatrixXd b = realize(spec.noise, drivers);
    bsup[static_cast<std::size_t>(p)] = b.cwiseAbs().maxCoeff();
    fsup[static_cast<std::size_t>(p)] = f.cwiseAbs().maxCoeff();
    f_l2[static_cast<std::size_t>(p)] = f.squaredNorm();
    b_l2[static_cast<std::size_t>(p)] = b.squaredNorm();
    out.mode_controls[static_cast<std::size_t>(p)] = std::move(controls);
    out.fields[static_cast<std::size_t>(p)] = std::move(f);
  });

  GraphonDiagnostics& d = out.diag;
  d.coercivity = solver.coercivity();
  d.rank = solver.rank();
  d.energy_total = solver.modes().energy_total;
  d.truncation_energy = solver.modes().truncation_energy;
  d.tol = tol;
  double worst_b = 0.0, worst_f = 0.0, worst_r = 0.0, worst_mr = 0.0, sum_r = 0.0;
  double sum_f2 = 0.0, sum_b2 = 0.0;
  for (std::size_t p = 0; p < paths.size(); ++p) {
    worst_b = std::max(worst_b, bsup[p]);
    worst_f = std::max(worst_f, fsup[p]);
    worst_r = std::max(worst_r, resid[p]);
    worst_mr = std::max(worst_mr, mode_resid[p]);
    sum_r += resid[p];
    sum_f2 += f_l2[p];
    sum_b2 += b_l2[p];
  }
  d.residual_scale = 1.0 + worst_b;
  d.max_foc_residual = worst_r;
  d.mean_foc_residual = paths.empty() ? 0.0 : sum_r / static_cast<double>(paths.size());
  d.max_mode_residual = worst_mr;
  d.truncation_residual_bound =
      kernel_sup_slice_norm(spec.B_tilde) * std::sqrt(d.truncation_energy) * worst_f;
  const double cell = spec.grid.dt / static_cast<double>(spec.graphon.n_u);
  d.field_l2_norm =
      paths.empty() ? 0.0 : std::sqrt(cell * sum_f2 / static_cast<double>(paths.size()));
  d.noise_l2_norm =
      paths.empty() ? 0.0 : std::sqrt(cell * sum_b2 / static_cast<double>(paths.size()));
  d.admissibility_constant = solver.admissibility_constant();
  d.precompute_seconds = solver.precompute_seconds();
  d.paths_seconds = seconds_since(t0);

  if (!std::isfinite(d.field_l2_norm) || !std::isfinite(d.max_foc_residual))
    throw numeric_error("graphon solve: non-finite field");
  if (full_rank) {
    for (std::size_t p = 0; p < paths.size(); ++p)
      if (resid[p] > tol * (1.0 + bsup[p]))
        throw solver_error("graphon solve: FOC residual " + std::to_string(resid[p]) +
                           " above tolerance on path " +
                           std::to_string(paths[p].path_id));
  }
  for (std::size_t p = 0; p < paths.size(); ++p)
    if (mode_resid[p] > tol * (1.0 + bsup[p]))
      throw solver_error("graphon solve: mode FOC residual above tolerance on path " +
                         std::to_string(paths[p].path_id));
  return out;
}

double graphon_objective_value(const GraphonGameSpec& spec, int u_index,
                               const Eigen::MatrixXd& field, const NoisePath& path,
                               double c_offset) {
  const int n_u = spec.graphon.n_u;
  const int n_t = spec.grid.n_t;
  require(u_index >= 0 && u_index < n_u, "graphon objective: label index out of range");
  require(field.rows() == n_u && field.cols() == n_t,
          "graphon objective: field must be n_u x n_t");
  const double dt = spec.grid.dt;

  const Eigen::MatrixXd ma = kernel_to_operator(spec.A_tilde).m;
  const Eigen::MatrixXd mb = kernel_to_operator(spec.B_tilde).m;
  const Eigen::VectorXd a_u = field.row(u_index).transpose();
  const Eigen::VectorXd wa_u =
      ((spec.graphon.values.row(u_index) / static_cast<double>(n_u)) * field).transpose();

  double j = 0.0;
  j -= dt * a_u.dot(ma * a_u) + spec.lambda * dt * a_u.squaredNorm();
  j -= dt * a_u.dot(mb * wa_u) + dt * wa_u.dot(mb * a_u);
  if (spec.C_tilde) {
    const Eigen::MatrixXd mc = kernel_to_operator(*spec.C_tilde).m;
    j -= dt * wa_u.dot(mc * wa_u);
  }
  const Eigen::MatrixXd b = realize(spec.noise, path.drivers);
  j += dt * b.row(u_index).dot(a_u.transpose());
  if (spec.b_star) {
    const Eigen::MatrixXd bs = realize(*spec.b_star, path.drivers);
    j += dt * bs.row(0).dot(wa_u.transpose());
  }
  return j + c_offset;
}

}  // namespace fredholm
