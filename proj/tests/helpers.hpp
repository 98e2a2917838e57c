// Deterministic random fixtures for tests, built on the library's own
// counter RNG so every platform and run sees identical inputs.
#pragma once

#include <Eigen/Dense>

#include "fredholm/kernel.hpp"
#include "fredholm/noise.hpp"
#include "fredholm/rng.hpp"

namespace testutil {

inline double uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c,
                      std::uint64_t d) {
  return fredholm::u01_from_bits(fredholm::rng_key(seed, a, b, c, d));
}

// Uniform in [-scale, scale].
inline double sym_uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c,
                          std::uint64_t d, double scale) {
  return scale * (2.0 * uniform(seed, a, b, c, d) - 1.0);
}

inline fredholm::KernelGrid random_volterra(const fredholm::TimeGrid& grid, int n,
                                            std::uint64_t seed, double scale) {
  fredholm::KernelGrid k = fredholm::zero_kernel(grid, n);
  for (int j = 0; j < grid.n_t; ++j)
    for (int l = 0; l < j; ++l)
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          k.at(j, l)(a, b) = sym_uniform(seed, j * 1024 + l, a, b, 0, scale);
  return k;
}

// Volterra kernel whose symmetrization is nonnegative definite on every
// grid: values sum low-rank products g_r(t) g_r(s) of smooth positive-leading
// polynomials over t > s.
inline fredholm::KernelGrid psd_volterra(const fredholm::TimeGrid& grid, std::uint64_t seed,
                                         double scale) {
  const int R = 2;
  std::vector<double> c(R), a(R), b(R);
  for (int r = 0; r < R; ++r) {
    c[r] = scale * (0.3 + 0.7 * uniform(seed, 5, r, 0, 0));
    a[r] = sym_uniform(seed, 5, r, 1, 0, 1.0);
    b[r] = sym_uniform(seed, 5, r, 2, 0, 1.0);
  }
  auto g = [&](int r, double t) { return 1.0 + a[r] * t + b[r] * t * t; };
  return fredholm::scalar_kernel_from_fn(grid, [&](double t, double s) {
    double v = 0.0;
    for (int r = 0; r < R; ++r) v += c[r] * g(r, t) * g(r, s);
    return v;
  });
}

// Random game noise: per-coordinate smooth drift, one idiosyncratic Brownian
// stream per coordinate plus one common stream loaded by everyone.
inline fredholm::NoiseModel random_noise(const fredholm::TimeGrid& grid, int dim,
                                         std::uint64_t seed) {
  fredholm::NoiseModel m;
  m.grid = grid;
  m.dim = dim;
  m.drift.resize(dim, grid.n_t);
  for (int i = 0; i < dim; ++i) {
    const double c0 = sym_uniform(seed, 1, i, 0, 0, 1.0);
    const double c1 = sym_uniform(seed, 1, i, 1, 0, 1.0);
    for (int j = 0; j < grid.n_t; ++j) m.drift(i, j) = c0 + c1 * grid.t[j];
  }
  for (int i = 0; i < dim; ++i) {
    fredholm::StreamGroup g;
    g.kind = fredholm::StreamKind::Brownian;
    g.dim = 1;
    g.tag = "idio";
    m.groups.push_back(g);
    Eigen::MatrixXd load = Eigen::MatrixXd::Zero(dim, grid.n_t);
    const double s0 = 0.2 + 0.8 * uniform(seed, 2, i, 0, 0);
    for (int j = 0; j < grid.n_t; ++j) load(i, j) = s0 * (1.0 + 0.1 * grid.t[j]);
    m.loadings.push_back(load);
  }
  fredholm::StreamGroup common;
  common.kind = fredholm::StreamKind::Brownian;
  common.dim = 1;
  common.common = true;
  common.tag = "common";
  m.groups.push_back(common);
  Eigen::MatrixXd cload(dim, grid.n_t);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < grid.n_t; ++j)
      cload(i, j) = 0.3 + 0.2 * uniform(seed, 3, i, 0, 0) - 0.05 * grid.t[j];
  m.loadings.push_back(cload);
  m.validate();
  return m;
}

// Deterministic noise: drift only, no streams.
inline fredholm::NoiseModel deterministic_noise(const fredholm::TimeGrid& grid, int dim,
                                                std::uint64_t seed) {
  fredholm::NoiseModel m;
  m.grid = grid;
  m.dim = dim;
  m.drift.resize(dim, grid.n_t);
  for (int i = 0; i < dim; ++i) {
    const double c0 = sym_uniform(seed, 4, i, 0, 0, 1.5);
    const double c1 = sym_uniform(seed, 4, i, 1, 0, 1.0);
    const double c2 = sym_uniform(seed, 4, i, 2, 0, 0.5);
    for (int j = 0; j < grid.n_t; ++j) {
      const double t = grid.t[j];
      m.drift(i, j) = c0 + c1 * t + c2 * t * t;
    }
  }
  m.validate();
  return m;
}

}  // namespace testutil
