#include "fredholm/noise.hpp"

#include <cmath>
#include <stdexcept>

#include "fredholm/rng.hpp"
#include "fredholm/threading.hpp"

namespace fredholm {

int NoiseModel::total_streams() const {
  int s = 0;
  for (const auto& g : groups) s += g.dim;
  return s;
}

void NoiseModel::validate() const {
  if (dim < 1) throw std::invalid_argument("NoiseModel: dim must be positive");
  if (drift.rows() != dim || drift.cols() != grid.n_t)
    throw std::invalid_argument("NoiseModel: drift must be dim x n_t");
  const int s = total_streams();
  if (static_cast<int>(loadings.size()) != s)
    throw std::invalid_argument("NoiseModel: one loading matrix per stream required");
  for (const auto& l : loadings)
    if (l.rows() != dim || l.cols() != grid.n_t)
      throw std::invalid_argument("NoiseModel: loading matrices must be dim x n_t");
  for (const auto& g : groups) {
    if (g.dim < 1) throw std::invalid_argument("NoiseModel: stream group dim must be positive");
    if (g.kind == StreamKind::CustomGaussian) {
      if (static_cast<int>(g.step_chol.size()) != grid.n_t - 1)
        throw std::invalid_argument("NoiseModel: custom_gaussian group needs n_t - 1 step factors");
      for (const auto& l : g.step_chol)
        if (l.rows() != g.dim || l.cols() != g.dim)
          throw std::invalid_argument("NoiseModel: step factor has wrong dimensions");
    } else if (g.dim != 1) {
      throw std::invalid_argument("NoiseModel: brownian/constant_random groups are scalar");
    }
  }
}

Eigen::MatrixXd simulate_drivers(const NoiseModel& model, long path_id, std::uint64_t seed) {
  const int n_t = model.grid.n_t;
  const double sqdt = std::sqrt(model.grid.dt);
  Eigen::MatrixXd drivers(model.total_streams(), n_t);
  int row = 0;
  for (std::size_t g = 0; g < model.groups.size(); ++g) {
    const StreamGroup& grp = model.groups[g];
    switch (grp.kind) {
      case StreamKind::Brownian: {
        double m = 0.0;
        drivers(row, 0) = 0.0;
        for (int k = 1; k < n_t; ++k) {
          m += sqdt * normal_draw(seed, static_cast<std::uint64_t>(path_id), g, k - 1, 0);
          drivers(row, k) = m;
        }
        ++row;
        break;
      }
      case StreamKind::ConstantRandom: {
        const double z = normal_draw(seed, static_cast<std::uint64_t>(path_id), g, 0, 0);
        drivers.row(row).setConstant(z);
        ++row;
        break;
      }
      case StreamKind::CustomGaussian: {
        Eigen::VectorXd m = Eigen::VectorXd::Zero(grp.dim);
        Eigen::VectorXd z(grp.dim);
        drivers.block(row, 0, grp.dim, 1).setZero();
        for (int k = 1; k < n_t; ++k) {
          for (int c = 0; c < grp.dim; ++c)
            z(c) = normal_draw(seed, static_cast<std::uint64_t>(path_id), g, k - 1, c);
          m.noalias() += grp.step_chol[k - 1] * z;
          drivers.block(row, k, grp.dim, 1) = m;
        }
        row += grp.dim;
        break;
      }
    }
  }
  return drivers;
}

Eigen::MatrixXd realize(const NoiseModel& model, const Eigen::MatrixXd& drivers) {
  Eigen::MatrixXd b = model.drift;
  const int s = model.total_streams();
  for (int st = 0; st < s; ++st)
    b.noalias() += model.loadings[st] * drivers.row(st).asDiagonal();
  return b;
}

std::vector<NoisePath> simulate(const NoiseModel& model, int n_paths, std::uint64_t seed,
                                int threads) {
  model.validate();
  if (n_paths < 1) throw std::invalid_argument("simulate: n_paths must be positive");
  std::vector<NoisePath> out(static_cast<std::size_t>(n_paths));
  parallel_for(n_paths, threads, [&](int p) {
    NoisePath& np = out[static_cast<std::size_t>(p)];
    np.path_id = p;
    np.seed = seed;
    np.drivers = simulate_drivers(model, p, seed);
    np.realized = realize(model, np.drivers);
  });
  return out;
}

Eigen::MatrixXd conditional_expectation(const NoiseModel& model, const Eigen::MatrixXd& drivers,
                                        int t_index) {
  const int n_t = model.grid.n_t;
  if (t_index < 0 || t_index >= n_t)
    throw std::invalid_argument("conditional_expectation: t_index out of range");
  Eigen::MatrixXd b = realize(model, drivers);
  if (t_index == n_t - 1) return b;  // everything realized
  // Future columns: freeze every driver at its t_index value.
  const int s = model.total_streams();
  const int m = n_t - 1 - t_index;
  Eigen::MatrixXd fut = model.drift.rightCols(m);
  for (int st = 0; st < s; ++st) fut += model.loadings[st].rightCols(m) * drivers(st, t_index);
  b.rightCols(m) = fut;
  return b;
}

Eigen::MatrixXd group_covariance(const NoiseModel& model, int group_index, int t_index) {
  const StreamGroup& g = model.groups.at(static_cast<std::size_t>(group_index));
  switch (g.kind) {
    case StreamKind::Brownian:
      return Eigen::MatrixXd::Constant(1, 1, model.grid.t[static_cast<std::size_t>(t_index)]);
    case StreamKind::ConstantRandom:
      return Eigen::MatrixXd::Constant(1, 1, 1.0);
    case StreamKind::CustomGaussian: {
      Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(g.dim, g.dim);
      for (int k = 0; k < t_index; ++k) cov.noalias() += g.step_chol[k] * g.step_chol[k].transpose();
      return cov;
    }
  }
  throw std::logic_error("group_covariance: unreachable");
}

NoiseModel linear_map(const NoiseModel& model, const Eigen::MatrixXd& w) {
  if (w.cols() != model.dim) throw std::invalid_argument("linear_map: weight matrix has wrong columns");
  NoiseModel out;
  out.grid = model.grid;
  out.dim = static_cast<int>(w.rows());
  out.drift = w * model.drift;
  out.groups = model.groups;
  out.loadings.reserve(model.loadings.size());
  for (const auto& l : model.loadings) out.loadings.push_back(w * l);
  return out;
}

Eigen::VectorXd drivers_at_T(const NoiseModel& model,
                             const std::vector<Eigen::MatrixXd>& terminal_chol,
                             const Eigen::MatrixXd& drivers, long path_id, std::uint64_t seed) {
  const int n_t = model.grid.n_t;
  const double sqdt = std::sqrt(model.grid.dt);
  Eigen::VectorXd at_T(model.total_streams());
  int row = 0;
  for (std::size_t g = 0; g < model.groups.size(); ++g) {
    const StreamGroup& grp = model.groups[g];
    switch (grp.kind) {
      case StreamKind::Brownian:
        at_T(row) = drivers(row, n_t - 1) +
                    sqdt * normal_draw(seed, static_cast<std::uint64_t>(path_id), g, n_t - 1, 0);
        ++row;
        break;
      case StreamKind::ConstantRandom:
        at_T(row) = drivers(row, n_t - 1);
        ++row;
        break;
      case StreamKind::CustomGaussian: {
        if (g >= terminal_chol.size() || terminal_chol[g].rows() != grp.dim)
          throw std::invalid_argument("drivers_at_T: missing terminal factor for custom group");
        Eigen::VectorXd z(grp.dim);
        for (int c = 0; c < grp.dim; ++c)
          z(c) = normal_draw(seed, static_cast<std::uint64_t>(path_id), g, n_t - 1, c);
        at_T.segment(row, grp.dim) =
            drivers.block(row, n_t - 1, grp.dim, 1) + terminal_chol[g] * z;
        row += grp.dim;
        break;
      }
    }
  }
  return at_T;
}

}  // namespace fredholm
