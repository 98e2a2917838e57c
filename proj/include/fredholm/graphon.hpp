// Continuum-player games with graphon interaction, solved by spectral
// decomposition of the interaction operator.
//
// A graphon W is represented by its values on the n_u cell midpoints
// u_j = (j + 1/2)/n_u of [0, 1]; the induced operator is
// (W f)(u_j) = (1/n_u) sum_k W[j][k] f(u_k), self-adjoint under the uniform
// discrete measure <f, g> = (1/n_u) sum_u f(u) g(u).  Eigenfunctions are
// normalized in that measure: (1/n_u) phi_i^T phi_j = delta_ij.
//
// The label-indexed equilibrium condition
//
//   2 lambda a_t(u) = b_t(u) - int_0^t A(t,s) a_s(u) ds
//                   - int_t^T A(s,t) E_t[a_s(u)] ds
//                   - int_0^t B(t,s) (W a_s)(u) ds
//                   - int_t^T B(s,t) E_t[(W a_s)(u)] ds
//
// decouples across eigenmodes of W: the i-th spectral coefficient of the
// control solves a scalar game with kernel A + theta_i B, and the residual
// label noise orthogonal to the kept modes solves independent per-label
// scalar games with kernel A alone (the theta = 0 equation).  At full rank
// the complement input vanishes and its solve is skipped.  Rank truncation
// replaces W by its kept-mode truncation; the effect shows up only in the
// interaction term and is surfaced in the reported FOC residual, never
// hidden.  Dropped modes with exactly zero eigenvalue are lossless: the
// complement solves their true equation.
#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fredholm/finite_game.hpp"
#include "fredholm/kernel.hpp"
#include "fredholm/noise.hpp"
#include "fredholm/timegrid.hpp"

namespace fredholm {

struct GraphonGrid {
  int n_u = 0;
  Eigen::MatrixXd values;  // n_u x n_u, symmetric, entries in [0, 1]

  double label(int j) const { return (j + 0.5) / n_u; }
  void validate() const;  // throws std::invalid_argument
};

// Samples a symmetric function on the midpoint label grid (fn is evaluated
// once per unordered pair, so the result is exactly symmetric).
GraphonGrid graphon_from_fn(int n_u, const std::function<double(double, double)>& fn);

struct SpectralModes {
  int n_u = 0;
  int rank = 0;
  Eigen::VectorXd theta;  // kept eigenvalues, signed, descending
  Eigen::MatrixXd phi;    // n_u x rank, orthonormal: (1/n_u) phi^T phi = I
  // Kept-mode indices (into theta/phi) ordered by |theta| descending: the
  // order in which truncation would remove modes, recorded alongside the
  // signed ordering above.
  std::vector<int> energy_order;
  double energy_total = 0.0;       // sum of theta_i^2 over all n_u modes
  double truncation_energy = 0.0;  // sum of theta_i^2 over dropped modes
};

// Symmetric eigendecomposition of the measure-weighted interaction matrix
// values/n_u.  Modes are dropped smallest |theta| first while the discarded
// spectral energy stays within energy_tol * energy_total, then further until
// rank <= max_rank (max_rank < 0 means uncapped).  Kept modes are ordered by
// signed eigenvalue, descending.
SpectralModes spectral_decompose(const GraphonGrid& w, double energy_tol = 1e-6,
                                 int max_rank = -1);

struct GraphonGameSpec {
  TimeGrid grid;
  KernelGrid A_tilde;  // scalar Volterra self-interaction kernel
  KernelGrid B_tilde;  // scalar Volterra interaction kernel
  double lambda = 0.0;
  GraphonGrid graphon;
  NoiseModel noise;  // label-indexed, dim = graphon.n_u
  // Objective-only pieces (they never enter the equilibrium condition).
  std::optional<KernelGrid> C_tilde;  // scalar Volterra
  std::optional<NoiseModel> b_star;   // dim 1, same driver streams as noise

  void validate() const;  // throws std::invalid_argument
};

struct GraphonCoercivityReport {
  double c_w_raw = 0.0;  // min over checked modes of eigmin(lambda I + sym form)
  double c_w = 0.0;      // c_w_raw clamped to <= lambda (per-node solvability)
  bool clamped = false;
  bool passed = false;  // c_w_raw > tol and the A-kernel check holds
  bool a_psd = false;   // symmetrized A_tilde operator is nonnegative definite
  int argmin_mode = -1;  // kept-mode index attaining c_w_raw; -1 = theta = 0 check
  std::string note;
};

// For every kept mode i (and for theta = 0 whenever the complement is live,
// i.e. rank < n_u), computes the smallest eigenvalue of
//   lambda I + (M_A + M_A^T + theta_i (M_B + M_B^T)) / 2
// with M_* the quadrature-weighted operator matrices, and verifies that the
// symmetrized A_tilde operator is nonnegative definite.  The reported c_w is
// the minimum over modes, clamped to lambda.
GraphonCoercivityReport coercivity_check_graphon(const GraphonGameSpec& spec,
                                                 const SpectralModes& modes, double tol);

// Spectral coefficients of label-indexed noise: coordinate i of the result is
// btilde^i_t = (1/n_u) sum_u phi_i(u) b_t(u), an affine model over the same
// driver streams (dim = rank).
NoiseModel mode_noise(const NoiseModel& label_noise, const SpectralModes& modes);

// Residual label noise orthogonal to the kept modes (dim = n_u):
// b - phi * btilde, again over the same driver streams.
NoiseModel complement_noise(const NoiseModel& label_noise, const SpectralModes& modes);

// Field of the kept modes alone: phi * mode_controls (n_u x n_t).
Eigen::MatrixXd reconstruct(const SpectralModes& modes, const Eigen::MatrixXd& mode_controls);

struct GraphonDiagnostics {
  GraphonCoercivityReport coercivity;
  int rank = 0;
  double energy_total = 0.0;
  double truncation_energy = 0.0;
  double max_foc_residual = 0.0;   // full-interaction defect, sup over (path, u, t)
  double mean_foc_residual = 0.0;  // mean over paths of the per-path sup
  double max_mode_residual = 0.0;  // per-mode scalar-game defect, sup over modes/paths
  double residual_scale = 0.0;     // 1 + sup |b|
  double tol = 0.0;
  // Heuristic scale of the interaction defect caused by rank truncation:
  // sup-slice norm of B_tilde times sqrt(truncation_energy) times sup |field|.
  double truncation_residual_bound = 0.0;
  double field_l2_norm = 0.0;  // discrete L2(paths x [0,T] x [0,1]) norm
  double noise_l2_norm = 0.0;
  // (2 + 4 C_E T e^{2 C_E T}) * C_gamma with C_E the largest squared-slice
  // norm of the per-mode resolvent kernels and C_gamma the largest
  // deterministic-input L2 amplification of the gamma transform; the field
  // L2 norm stays below admissibility_constant * noise_l2_norm.
  double admissibility_constant = 0.0;
  double precompute_seconds = 0.0;
  double paths_seconds = 0.0;
};

struct GraphonEquilibrium {
  TimeGrid grid;
  int n_u = 0;
  SpectralModes modes;
  std::vector<Eigen::MatrixXd> mode_controls;  // per path, rank x n_t
  std::vector<Eigen::MatrixXd> fields;         // per path, n_u x n_t
  GraphonDiagnostics diag;
};

class GraphonSolver {
 public:
  // Decomposes the graphon, validates coercivity (assumption_error on
  // failure), and precomputes one scalar equilibrium operator per kept mode
  // plus, when rank < n_u, the shared theta = 0 operator for the complement.
  explicit GraphonSolver(const GraphonGameSpec& spec, double energy_tol = 1e-6,
                         int max_rank = -1, double coercivity_tol = 1e-10);

  const GraphonGameSpec& spec() const { return spec_; }
  const SpectralModes& modes() const { return modes_; }
  const GraphonCoercivityReport& coercivity() const { return coercivity_; }
  int rank() const { return modes_.rank; }
  bool complement_active() const { return complement_op_ != nullptr; }
  const EquilibriumOperator& mode_operator(int i) const;
  const EquilibriumOperator& complement_operator() const;  // requires complement_active()
  const NoiseModel& mode_noise_model() const { return mode_noise_; }

  // Per-path evaluations; drivers come from the label noise model (all mode
  // models share its driver streams).
  Eigen::MatrixXd mode_controls(const Eigen::MatrixXd& drivers) const;  // rank x n_t
  Eigen::MatrixXd complement_field(const Eigen::MatrixXd& drivers) const;  // n_u x n_t
  Eigen::MatrixXd field(const Eigen::MatrixXd& drivers) const;             // n_u x n_t
  // E_{t_j}[field]: realized prefix, exact affine continuation (n_u x n_t).
  Eigen::MatrixXd conditional_field(const Eigen::MatrixXd& drivers, int t_index) const;
  // Sup over (u, t) of the equilibrium-condition defect of `field` along the
  // path, with the interaction evaluated through the full graphon (not its
  // truncation), so truncation error is visible here. Future conditional
  // expectations are those of the solver's own equilibrium continuation (the
  // only candidate whose adapted structure is known); at `field(drivers)`
  // itself this is the exact conditional defect.
  double foc_residual(const Eigen::MatrixXd& drivers, const Eigen::MatrixXd& field) const;

  double admissibility_constant() const { return admissibility_constant_; }
  double precompute_seconds() const { return precompute_seconds_; }

 private:
  GraphonGameSpec spec_;
  SpectralModes modes_;
  GraphonCoercivityReport coercivity_;
  NoiseModel mode_noise_;  // dim = rank
  std::vector<EquilibriumOperator> mode_ops_;
  std::unique_ptr<EquilibriumOperator> complement_op_;
  NoiseModel complement_gamma_;  // dim = n_u, gamma transform of the complement noise
  Eigen::MatrixXd ma_;           // operator matrix of A_tilde
  Eigen::MatrixXd mb_;           // operator matrix of B_tilde
  Eigen::MatrixXd w_over_n_;     // graphon.values / n_u
  double admissibility_constant_ = 0.0;
  double precompute_seconds_ = 0.0;
};

// Full solve over an ensemble of label-noise paths.  Checks coercivity
// (assumption_error on failure); at full rank the per-path full-interaction
// FOC residual is gated against tol * (1 + sup |b|) (solver_error naming the
// path), at truncated rank it is reported together with the truncation bound.
GraphonEquilibrium solve_graphon(const GraphonGameSpec& spec, const std::vector<NoisePath>& paths,
                                 double tol = 1e-8, double energy_tol = 1e-6, int max_rank = -1,
                                 int threads = 0);

// Objective value of the label u_index under the control profile `field`
// (n_u x n_t) along one path; c_offset is the realized scalar c(u).
double graphon_objective_value(const GraphonGameSpec& spec, int u_index,
                               const Eigen::MatrixXd& field, const NoisePath& path,
                               double c_offset = 0.0);

}  // namespace fredholm
