#pragma once

// Builders that turn concrete stochastic-game models into the solver's
// kernel/noise normal form, plus the generic Volterra-objective reduction
// they all share.
//
// The common pattern: each player i observes a two-dimensional auxiliary
// state Y^i_t = (X^i_t, Z^i_t) that is an affine Volterra functional of the
// control profile,
//
//     Y^i_t = d^i_t + sum_j int_0^t G^{ij}(t,s) alpha^j_s ds,
//
// where G^{ij}(t,s) in R^2 stacks the state row G1^{ij} and the aggregate row
// G2^{ij}, and d^i = (P^i, R^i) is the uncontrolled part.  The running reward
// is -p_i a^2 - y' Q_i y + a q_i' y and the terminal reward -y' S_i y + y' s_i.
// Substituting the state formula and reordering the double integrals yields an
// equivalent control-only objective
//
//     J^i = -lambda_i <a^i, a^i> - <a, F^i a> + <b^i, a> + c^i,
//
// whose interaction kernels, linear terms, and offsets `volterra_reduce`
// assembles on the time grid.  All time integrals use the same left-rectangle
// rule as the rest of the library, so the cross (linear) terms of the reduced
// objective match a direct state-space quadrature exactly; the quadratic
// terms agree up to the O(dt) mass of the diagonal time cells, which a
// Volterra kernel grid cannot carry.
//
// Terminal data: the grid stores nodes t_0..t_{n_t-1} = T - dt only, but the
// terminal cost needs G(T, s) and the value of d at T.  Inputs therefore
// carry an explicit terminal row for the kernels and a `TerminalAffine`
// description of d_T (and optionally of the terminal linear cost s_i) in
// terms of the terminal driver values, which `drivers_at_T` can realize.
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fredholm/finite_game.hpp"
#include "fredholm/kernel.hpp"
#include "fredholm/noise.hpp"

namespace fredholm {

// Affine functional of the terminal driver vector: value = mean + sum_s
// loadings[s] * drivers_T(s).  Used for d_T and for terminal linear costs
// that are martingales (so their time-t conditional expectation is the same
// affine map applied to the time-t driver values).
struct TerminalAffine {
  Eigen::VectorXd mean;
  std::vector<Eigen::VectorXd> loadings;  // one vector per driver stream

  Eigen::VectorXd realize(const Eigen::VectorXd& drivers_T) const;
};

// A game in auxiliary-state form.  Coordinates of d (and of the state value
// Y): rows 0..N-1 hold the X components, rows N..2N-1 the Z components, so
// player i's pair is (i, N+i).  G1 and G2 are N-block Volterra kernel grids;
// G1_at_T / G2_at_T give the extra row G(T, t_k) needed by terminal costs.
struct VolterraGameInput {
  TimeGrid grid;
  int N = 0;
  KernelGrid G1;
  KernelGrid G2;
  std::vector<Eigen::MatrixXd> G1_at_T;  // n_t matrices, N x N
  std::vector<Eigen::MatrixXd> G2_at_T;
  std::vector<double> p;                // control cost weights, > 0
  std::vector<Eigen::Matrix2d> Q;       // running state cost
  std::vector<Eigen::Vector2d> q;       // running cross term
  std::vector<Eigen::Matrix2d> S;       // terminal state cost
  NoiseModel d;                         // dim 2N, martingale-affine
  TerminalAffine d_terminal;            // value of d at T
  std::optional<TerminalAffine> s_terminal;  // terminal linear cost, dim 2N
                                             // (rows like d; player i reads
                                             // coordinates (i, N+i)); absent
                                             // means zero
  std::vector<Eigen::MatrixXd> terminal_chol;  // per noise group, for
                                               // drivers_at_T (empty matrix
                                               // for non-custom groups)

  void validate() const;
};

// Result of the objective reduction: a solver-ready spec plus the aggregate
// interaction kernel Gamma = B + Bbar* whose quadratic form (together with
// the control weights) decides coercivity.
struct ReducedVolterraGame {
  FiniteGameSpec spec;
  KernelGrid gamma;  // N-block, full square support
  std::vector<Eigen::MatrixXd> terminal_chol;  // copied from the input
};

ReducedVolterraGame volterra_reduce(const VolterraGameInput& in);

// --- Direct state-space evaluation (oracle side of the reduction) ---

// Realized auxiliary states: Y(:, j) = d(:, j) + sum_{k<j} G(t_j,t_k) a_k dt,
// with d_realized the realized path of d (2N x n_t) and alpha N x n_t.
Eigen::MatrixXd volterra_states(const VolterraGameInput& in,
                                const Eigen::MatrixXd& alpha,
                                const Eigen::MatrixXd& d_realized);

// Terminal state Y_T = d_T + sum_k G(T,t_k) a_k dt.
Eigen::VectorXd volterra_terminal_state(const VolterraGameInput& in,
                                        const Eigen::MatrixXd& alpha,
                                        const Eigen::VectorXd& d_T);

// Left-rectangle quadrature of player i's running reward plus the terminal
// reward, evaluated on the realized states.  s_realized has dim 2N (zero if
// the input has no terminal linear cost).
double volterra_direct_objective(const VolterraGameInput& in, int player,
                                 const Eigen::MatrixXd& alpha,
                                 const Eigen::MatrixXd& d_realized,
                                 const Eigen::VectorXd& d_T,
                                 const Eigen::VectorXd& s_realized);

// Constant (control-free) part of player i's reduced objective on one path:
// c_i = -int d_i' Q_i d_i dt - d_T' S_i d_T + d_T' s_i with d_i = (P^i, R^i).
Eigen::VectorXd volterra_c_offsets(const VolterraGameInput& in,
                                   const Eigen::MatrixXd& d_realized,
                                   const Eigen::VectorXd& d_T,
                                   const Eigen::VectorXd& s_realized);

// --- Linear Volterra state systems -----------------------------------------

// Solution operator for X = M + int_0^t (H + K w) X ds, where H and K are
// N-block Volterra kernels and w an N x N matrix acting across components
// (combined kernel A(t,s) = H(t,s) + K(t,s) * w).  The stored resolvent R
// satisfies R = -A + A*R, and X = M - int R M.
struct LinearVolterraSystem {
  KernelGrid resolvent;
};

LinearVolterraSystem build_linear_volterra(const KernelGrid& H,
                                           const KernelGrid& K,
                                           const Eigen::MatrixXd& w);

// Apply the solution operator to a realized forcing path M (N x n_t).
Eigen::MatrixXd linear_volterra_path(const LinearVolterraSystem& sys,
                                     const Eigen::MatrixXd& m);

// For forcing M = N + int L alpha, the solution is X = (solved N-part)
// + int (L - R*L) alpha: returns the effective control kernel L - R*L.
KernelGrid effective_control_kernel(const LinearVolterraSystem& sys,
                                    const KernelGrid& L);

// --- Inter-bank lending with delayed repayment ------------------------------

// dX^i_t = (int_0^t alpha^i_{t-s} nu(ds) + h^i_t) dt + dV^i_t, X^i_0 = xi^i;
// player i tracks the weighted average Z^i = sum_j w_sys_ij X^j and pays
// running cost  (1/2)a^2 - kappa_i a (Z - X) + (eps_i/2)(Z - X)^2  and
// terminal cost (c_i/2)(Z - X)^2.  The lending measure nu is a finite list
// of atoms (time, weight); nu([0, x]) = sum of weights with atom time <= x.
// Atom times are snapped to the nearest grid multiple (warning on stderr if
// the snap moves them).
struct SystemicRiskInput {
  TimeGrid grid;
  int N = 0;
  std::vector<std::pair<double, double>> nu;  // (atom time, weight)
  Eigen::MatrixXd w_sys;                      // N x N, nonnegative entries
  Eigen::VectorXd kappa;                      // incentive to borrow/lend
  Eigen::VectorXd epsilon;                    // running penalty, kappa^2 < eps
  Eigen::VectorXd c;                          // terminal penalty, >= 0
  Eigen::VectorXd xi;                         // initial states
  Eigen::MatrixXd h;                          // N x n_t deterministic drift
  NoiseModel V;                               // dim N noise, typically
                                              // Brownian with constant vol
  std::optional<TerminalAffine> v_terminal;   // V at T; defaults to the last
                                              // grid column (exact for
                                              // time-constant coefficients)

  void validate() const;
};

VolterraGameInput systemic_risk_build(const SystemicRiskInput& in);

// Sufficient-condition report for the lending game with nu = delta_0 -
// delta_tau (or nu = delta_0 when no repayment atom lies inside the horizon).
// With dw = diag(w_sys), the three conditions are positive semidefiniteness
// of diag(eps) (I - dw)(I - w) and diag(c) (I - dw)(I - w)  (as quadratic
// forms, i.e. of the symmetric parts), plus a smallness condition on the
// incentive matrix  Km = diag(kappa) (2I - w - dw):
//   - delay branch (repayment inside the horizon):
//       (T/2) ||Km||_F < 1,  so the critical horizon is T* = 2 / ||Km||_F;
//   - no-repayment branch: Km positive semidefinite as a quadratic form.
struct SystemicAssumptionReport {
  bool delay_branch = true;
  double eps_min_eig = 0.0;  // min eigenvalue of the symmetrized eps matrix
  double c_min_eig = 0.0;
  bool eps_psd = false;
  bool c_psd = false;
  double kappa_norm = 0.0;    // ||Km||_F (delay branch)
  double kappa_lhs = 0.0;     // (T/2) ||Km||_F
  double critical_T = 0.0;    // 2 / ||Km||_F, +inf when Km == 0
  double kappa_min_eig = 0.0; // min eigenvalue of sym(Km) (no-repayment)
  bool kappa_ok = false;
  bool passed = false;
};

SystemicAssumptionReport systemic_assumption_check(const SystemicRiskInput& in,
                                                   double horizon = -1.0);

// --- Interacting diffusions on a weighted network ----------------------------

// dX_t = (A X_t + diag(b) alpha_t) dt + sigma dB_t with
// A = diag(a) + (1/N) diag(c) w_net, aggregates Z = (1/N) w_net X.  Player
// i's running cost is (1/2) x' C_f x on x = (X^i, alpha^i, Z^i) and terminal
// cost (1/2) y' C_g y on y = (X^i, Z^i); rewards are their negatives.
// Requires [C_f]_22 > 0.  The uncontrolled state is represented exactly via
// the martingale M_t = int_0^t e^{-A s} sigma dB_s (a custom Gaussian driver
// group with per-step covariance int e^{-As} e^{-A's} ds sigma^2 computed by
// a block matrix exponential), so conditional expectations and terminal draws
// are exact Gaussian, not Euler.
struct NetworkSDEInput {
  TimeGrid grid;
  int N = 0;
  Eigen::VectorXd a;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  Eigen::MatrixXd w_net;  // entries in [0, 1], symmetric
  std::vector<Eigen::Matrix3d> C_f;  // symmetric, per player
  std::vector<Eigen::Matrix2d> C_g;  // symmetric, per player
  Eigen::VectorXd xi;
  double sigma = 1.0;

  void validate() const;
};

VolterraGameInput network_sde_build(const NetworkSDEInput& in);

// --- Flocking on a simple graph ----------------------------------------------

// Undirected simple graph on N vertices; L is the normalized Laplacian
// (L_ii = 1, L_ij = -1/sqrt(d_i d_j) on edges).  dX = (-a_bar L X + alpha) dt
// + sigma_bar dB; player i tracks Z^i = ((I - L) X)_i with running cost
// (1/2)a^2 - q_sim a (Z - X) + (eps_sim/2)(Z - X)^2 and terminal cost
// (c_sim/2)(Z - X)^2, q_sim^2 <= eps_sim.  The graph must be connected.
struct SimpleGraphInput {
  TimeGrid grid;
  int N = 0;
  std::vector<std::pair<int, int>> edges;
  double a_bar = 0.0;     // >= 0
  double sigma_bar = 1.0; // > 0
  double q_sim = 0.0;
  double eps_sim = 0.0;   // >= q_sim^2
  double c_sim = 0.0;     // >= 0
  Eigen::VectorXd xi;

  void validate() const;
};

// Exposed for reuse and direct testing: throws std::invalid_argument on
// loops, out-of-range vertices, duplicate edges, or a disconnected graph.
Eigen::MatrixXd normalized_laplacian(int N,
                                     const std::vector<std::pair<int, int>>& edges);

VolterraGameInput simple_graph_build(const SimpleGraphInput& in);

}  // namespace fredholm
