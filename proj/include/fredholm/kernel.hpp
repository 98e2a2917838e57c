// Two-time operator kernels on the uniform grid and the small calculus the
// equilibrium formulas need: quadrature-weighted operator matrices, adjoints,
// second-argument truncations, kernel composition (star product), Volterra
// resolvents, and the coercivity eigenvalue check.
//
// Conventions.  A KernelGrid stores the raw kernel values K(t_j, t_k) as
// n x n blocks; it induces the integral operator (K f)(t) = int_0^T K(t,s)
// f(s) ds, discretized with left-rectangle weight dt.  The corresponding
// OperatorMatrix is dense with block entry M[(j,a),(k,b)] = K_ab(t_j,t_k)*dt
// and row/column index j*n + a (time-major), so a Volterra kernel gives a
// strictly block-lower-triangular matrix and a truncation in the second
// argument zeroes leading block columns.
#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "fredholm/timegrid.hpp"

namespace fredholm {

struct KernelGrid {
  TimeGrid grid;
  int n = 1;                  // block dimension
  bool is_volterra = true;    // K(t,s) = 0 for s >= t
  std::vector<Eigen::MatrixXd> values;  // n_t*n_t blocks, index j*n_t + k

  const Eigen::MatrixXd& at(int j, int k) const { return values[static_cast<std::size_t>(j) * grid.n_t + k]; }
  Eigen::MatrixXd& at(int j, int k) { return values[static_cast<std::size_t>(j) * grid.n_t + k]; }
};

// Kernel with all blocks zero.
KernelGrid zero_kernel(const TimeGrid& grid, int n);

// Samples a matrix-valued function K(t,s) on the grid.  When volterra is
// true, blocks with s >= t are forced to zero regardless of fn.
KernelGrid kernel_from_fn(const TimeGrid& grid, int n,
                          const std::function<Eigen::MatrixXd(double, double)>& fn,
                          bool volterra = true);

// Scalar (n = 1) convenience overload.
KernelGrid scalar_kernel_from_fn(const TimeGrid& grid,
                                 const std::function<double(double, double)>& fn,
                                 bool volterra = true);

struct OperatorMatrix {
  TimeGrid grid;
  int n = 1;
  bool is_volterra = true;
  Eigen::MatrixXd m;  // (n*n_t) x (n*n_t), quadrature weight dt folded in
};

OperatorMatrix kernel_to_operator(const KernelGrid& k);

// Adjoint kernel K*(t,s) = K(s,t)^T.  The adjoint of a Volterra kernel is
// supported on s > t, hence not Volterra.
KernelGrid adjoint(const KernelGrid& k);

// Second-argument truncation: output(j,k) = K(j,k) * 1{k > t_index}.
KernelGrid truncate(const KernelGrid& k, int t_index);

// (G star H)(t,s) = int_0^T G(t,r) H(r,s) dr on the grid.
KernelGrid star_product(const KernelGrid& g, const KernelGrid& h);

// Resolvent R of a Volterra kernel K: the solution of R = -K + K star R.
// With it, x = m - int R m solves the linear Volterra equation
// x = m + int K x.  On the grid the defining equation is a finite
// block-triangular system solved exactly by forward substitution.
KernelGrid volterra_resolvent(const KernelGrid& k);

struct CoercivityReport {
  double c0_estimate = 0.0;       // smallest eigenvalue of the checked form
  bool passed = false;            // c0_estimate > tol
  bool borderline = false;        // passed but c0_estimate < 10 * tol
  std::string note;
};

// Discrete check of the standing positivity assumption: the quadratic form
// <f, (B + Bbar*) f> + <f, 2 Lambda f> must dominate c0 <f, f>.  sym_part is
// the operator matrix of B + Bbar*; lambda holds the per-coordinate lambda_i
// (all must be positive).  c0_estimate is the smallest eigenvalue of
// sym(M)/dt-normalized form plus diag(2 lambda), i.e. of
// 0.5*(M + M^T) + diag(2 lambda_a) in the per-unit-mass normalization.
CoercivityReport coercivity_check(const OperatorMatrix& sym_part,
                                  const std::vector<double>& lambda, double tol);

// CSV serialization with header "j,k,a,b,value" (only nonzero blocks need to
// be present on read; missing entries are zero).
void write_kernel_csv(const std::string& path, const KernelGrid& k);
KernelGrid read_kernel_csv(const std::string& path, const TimeGrid& grid, int n,
                           bool is_volterra);

// Max absolute entry over all blocks (diagnostic sup norm of kernel values).
double kernel_sup_norm(const KernelGrid& k);

// Largest per-slice L1 norm sup_t int (|K(t,s)| + |K(s,t)|) ds, a recorded
// diagnostic for the admissibility of a kernel (not gated).
double kernel_sup_slice_norm(const KernelGrid& k);

}  // namespace fredholm
