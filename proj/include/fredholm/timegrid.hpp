// Uniform time grid used by every kernel/operator discretization in the
// library.  Integrals over [0, T] are left-rectangle sums over the nodes
// t_k = k * dt, k = 0..n_t-1 (the right endpoint T is not a node), which
// keeps Volterra kernels strictly causal on the grid: a kernel value K(t, s)
// with s >= t never receives quadrature weight.
#pragma once

#include <stdexcept>
#include <vector>

namespace fredholm {

struct TimeGrid {
  double T = 0.0;
  int n_t = 0;
  double dt = 0.0;
  std::vector<double> t;  // nodes t_k = k * dt, size n_t

  bool operator==(const TimeGrid& o) const { return T == o.T && n_t == o.n_t; }
  bool operator!=(const TimeGrid& o) const { return !(*this == o); }
};

inline TimeGrid make_grid(double T, int n_t) {
  if (!(T > 0.0)) throw std::invalid_argument("make_grid: horizon T must be positive");
  if (n_t < 2) throw std::invalid_argument("make_grid: n_t must be at least 2");
  TimeGrid g;
  g.T = T;
  g.n_t = n_t;
  g.dt = T / static_cast<double>(n_t);
  g.t.resize(n_t);
  for (int k = 0; k < n_t; ++k) g.t[k] = g.dt * static_cast<double>(k);
  return g;
}

}  // namespace fredholm
