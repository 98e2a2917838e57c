#include "fredholm/kernel.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fredholm/errors.hpp"

namespace fredholm {

KernelGrid zero_kernel(const TimeGrid& grid, int n) {
  if (n < 1) throw std::invalid_argument("zero_kernel: block dimension must be positive");
  KernelGrid k;
  k.grid = grid;
  k.n = n;
  k.is_volterra = true;
  k.values.assign(static_cast<std::size_t>(grid.n_t) * grid.n_t, Eigen::MatrixXd::Zero(n, n));
  return k;
}

KernelGrid kernel_from_fn(const TimeGrid& grid, int n,
                          const std::function<Eigen::MatrixXd(double, double)>& fn,
                          bool volterra) {
  KernelGrid k = zero_kernel(grid, n);
  k.is_volterra = volterra;
  for (int j = 0; j < grid.n_t; ++j) {
    for (int kk = 0; kk < grid.n_t; ++kk) {
      if (volterra && kk >= j) continue;
      Eigen::MatrixXd v = fn(grid.t[j], grid.t[kk]);
      if (v.rows() != n || v.cols() != n)
        throw std::invalid_argument("kernel_from_fn: block has wrong dimensions");
      k.at(j, kk) = std::move(v);
    }
  }
  return k;
}

KernelGrid scalar_kernel_from_fn(const TimeGrid& grid,
                                 const std::function<double(double, double)>& fn,
                                 bool volterra) {
  return kernel_from_fn(
      grid, 1,
      [&fn](double t, double s) {
        Eigen::MatrixXd v(1, 1);
        v(0, 0) = fn(t, s);
        return v;
      },
      volterra);
}

OperatorMatrix kernel_to_operator(const KernelGrid& k) {
  const int n_t = k.grid.n_t;
  const int n = k.n;
  OperatorMatrix op;
  op.grid = k.grid;
  op.n = n;
  op.is_volterra = k.is_volterra;
  op.m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n) * n_t, static_cast<Eigen::Index>(n) * n_t);
  for (int j = 0; j < n_t; ++j)
    for (int kk = 0; kk < n_t; ++kk)
      op.m.block(static_cast<Eigen::Index>(j) * n, static_cast<Eigen::Index>(kk) * n, n, n) =
          k.at(j, kk) * k.grid.dt;
  return op;
}

KernelGrid adjoint(const KernelGrid& k) {
  KernelGrid out = zero_kernel(k.grid, k.n);
  // A Volterra input is supported on s < t, so its adjoint lives on s > t and
  // in general neither input nor output is Volterra.
  out.is_volterra = false;
  for (int j = 0; j < k.grid.n_t; ++j)
    for (int kk = 0; kk < k.grid.n_t; ++kk) out.at(j, kk) = k.at(kk, j).transpose();
  return out;
}

KernelGrid truncate(const KernelGrid& k, int t_index) {
  if (t_index < 0 || t_index >= k.grid.n_t)
    throw std::invalid_argument("truncate: t_index out of range");
  KernelGrid out = k;
  for (int j = 0; j < k.grid.n_t; ++j)
    for (int kk = 0; kk <= t_index; ++kk) out.at(j, kk).setZero();
  return out;
}

KernelGrid star_product(const KernelGrid& g, const KernelGrid& h) {
  if (g.grid != h.grid || g.n != h.n)
    throw std::invalid_argument("star_product: incompatible kernels");
  const int n_t = g.grid.n_t;
  const double dt = g.grid.dt;
  KernelGrid out = zero_kernel(g.grid, g.n);
  out.is_volterra = g.is_volterra && h.is_volterra;
  Eigen::MatrixXd acc(g.n, g.n);
  for (int j = 0; j < n_t; ++j) {
    for (int kk = 0; kk < n_t; ++kk) {
      acc.setZero();
      // For Volterra factors only r strictly between k and j contributes.
      const int lo = out.is_volterra ? kk + 1 : 0;
      const int hi = out.is_volterra ? j : n_t;
      for (int r = lo; r < hi; ++r) acc.noalias() += g.at(j, r) * h.at(r, kk);
      out.at(j, kk) = acc * dt;
    }
  }
  return out;
}

KernelGrid volterra_resolvent(const KernelGrid& k) {
  if (!k.is_volterra)
    throw std::invalid_argument("volterra_resolvent: kernel must be Volterra");
  const int n_t = k.grid.n_t;
  const double dt = k.grid.dt;
  KernelGrid r = zero_kernel(k.grid, k.n);
  // R(t_j, t_k) = -K(t_j, t_k) + dt * sum_{k < l < j} K(t_j, t_l) R(t_l, t_k);
  // increasing j makes this exact forward substitution.
  for (int kk = 0; kk < n_t; ++kk) {
    for (int j = kk + 1; j < n_t; ++j) {
      Eigen::MatrixXd acc = -k.at(j, kk);
      for (int l = kk + 1; l < j; ++l) acc.noalias() += dt * k.at(j, l) * r.at(l, kk);
      r.at(j, kk) = std::move(acc);
    }
  }
  return r;
}

CoercivityReport coercivity_check(const OperatorMatrix& sym_part,
                                  const std::vector<double>& lambda, double tol) {
  const int n = sym_part.n;
  const int n_t = sym_part.grid.n_t;
  if (static_cast<int>(lambda.size()) != n)
    throw std::invalid_argument("coercivity_check: lambda size must equal block dimension");
  for (double l : lambda)
    if (!(l > 0.0)) throw std::invalid_argument("coercivity_check: lambda entries must be positive");

  // Per-unit-mass form: symmetrize the quadrature-weighted operator matrix
  // and add 2*lambda on the diagonal (the generalized eigenproblem against
  // the dt-weighted mass matrix reduces to an ordinary one).
  Eigen::MatrixXd form = 0.5 * (sym_part.m + sym_part.m.transpose());
  for (int j = 0; j < n_t; ++j)
    for (int a = 0; a < n; ++a) form(static_cast<Eigen::Index>(j) * n + a, static_cast<Eigen::Index>(j) * n + a) += 2.0 * lambda[a];

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(form, Eigen::EigenvaluesOnly);
  CoercivityReport rep;
  rep.c0_estimate = es.eigenvalues().minCoeff();
  rep.passed = rep.c0_estimate > tol;
  rep.borderline = rep.passed && rep.c0_estimate < 10.0 * tol;
  if (!rep.passed)
    rep.note = "coercivity form has nonpositive directions";
  else if (rep.borderline)
    rep.note = "coercivity margin is within 10x of the tolerance";
  return rep;
}

void write_kernel_csv(const std::string& path, const KernelGrid& k) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_kernel_csv: cannot open " + path);
  out << "j,k,a,b,value\n";
  char buf[64];
  for (int j = 0; j < k.grid.n_t; ++j)
    for (int kk = 0; kk < k.grid.n_t; ++kk) {
      const Eigen::MatrixXd& blk = k.at(j, kk);
      for (int a = 0; a < k.n; ++a)
        for (int b = 0; b < k.n; ++b) {
          if (blk(a, b) == 0.0) continue;
          std::snprintf(buf, sizeof(buf), "%.17g", blk(a, b));
          out << j << ',' << kk << ',' << a << ',' << b << ',' << buf << '\n';
        }
    }
}

KernelGrid read_kernel_csv(const std::string& path, const TimeGrid& grid, int n,
                           bool is_volterra) {
  std::ifstream in(path);
  if (!in) throw schema_error("read_kernel_csv: cannot open " + path);
  KernelGrid k = zero_kernel(grid, n);
  k.is_volterra = is_volterra;
  std::string line;
  if (!std::getline(in, line)) throw schema_error("read_kernel_csv: empty file " + path);
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    int j, kk, a, b;
    double v;
    char comma;
    if (!(ss >> j >> comma >> kk >> comma >> a >> comma >> b >> comma >> v))
      throw schema_error("read_kernel_csv: malformed line " + std::to_string(lineno) + " in " + path);
    if (j < 0 || j >= grid.n_t || kk < 0 || kk >= grid.n_t || a < 0 || a >= n || b < 0 || b >= n)
      throw schema_error("read_kernel_csv: index out of range at line " + std::to_string(lineno));
    if (is_volterra && kk >= j && v != 0.0)
      throw schema_error("read_kernel_csv: nonzero value above the diagonal in a causal kernel, line " +
                         std::to_string(lineno));
    k.at(j, kk)(a, b) = v;
  }
  return k;
}

double kernel_sup_norm(const KernelGrid& k) {
  double m = 0.0;
  for (const auto& blk : k.values) {
    if (blk.size() > 0) m = std::max(m, blk.cwiseAbs().maxCoeff());
  }
  return m;
}

double kernel_sup_slice_norm(const KernelGrid& k) {
  const int n_t = k.grid.n_t;
  double worst = 0.0;
  for (int j = 0; j < n_t; ++j) {
    double acc = 0.0;
    for (int kk = 0; kk < n_t; ++kk)
      acc += (k.at(j, kk).cwiseAbs().maxCoeff() + k.at(kk, j).cwiseAbs().maxCoeff()) * k.grid.dt;
    worst = std::max(worst, acc);
  }
  return worst;
}

}  // namespace fredholm
