// Martingale-affine noise inputs.
//
// Every stochastic input process b in the library has the form
//
//   b_i(t) = m_i(t) + sum_s sigma_{i,s}(t) * M^s_t,
//
// where the M^s are independent martingale driver streams (grouped:
// components of one group may be correlated through per-step Cholesky
// factors, groups are independent).  This form is closed under linear maps
// across coordinates and makes conditional expectations exact:
// E_t[b_i(r)] = m_i(r) + sum_s sigma_{i,s}(r) * M^s_t for r >= t, with no
// nested simulation.
//
// Stream kinds:
//   brownian        - scalar standard Brownian motion, M_{t_0} = 0 and
//                     increments sqrt(dt) * z_k over each grid step;
//   constant_random - centered standard normal drawn once per path, constant
//                     in time (randomness revealed at time 0);
//   custom_gaussian - vector martingale with M_{t_0} = 0 and Gaussian step
//                     increments L_k z_k (L_k a per-step Cholesky factor),
//                     used by the state-space example builders to carry
//                     exact stochastic convolutions.
//
// All variates come from the counter RNG in rng.hpp keyed by
// (seed, path, group, step, component), so ensembles are order-independent
// and identical for every worker count.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "fredholm/timegrid.hpp"

namespace fredholm {

enum class StreamKind { Brownian, ConstantRandom, CustomGaussian };

struct StreamGroup {
  StreamKind kind = StreamKind::Brownian;
  int dim = 1;          // number of components (streams) in the group
  bool common = false;  // shared across coordinates (informational)
  std::string tag;      // provenance label for artifacts
  // CustomGaussian only: n_t - 1 factors, increment covariance over step k
  // is step_chol[k] * step_chol[k]^T.
  std::vector<Eigen::MatrixXd> step_chol;
};

struct NoiseModel {
  TimeGrid grid;
  int dim = 0;                            // number of coordinates of b
  Eigen::MatrixXd drift;                  // dim x n_t
  std::vector<StreamGroup> groups;
  std::vector<Eigen::MatrixXd> loadings;  // one dim x n_t matrix per stream,
                                          // streams flattened in group order

  int total_streams() const;
  void validate() const;  // dimension/factor consistency (throws)
};

struct NoisePath {
  Eigen::MatrixXd drivers;   // total_streams x n_t, martingale values at nodes
  Eigen::MatrixXd realized;  // dim x n_t, realized b along this path
  long path_id = 0;
  std::uint64_t seed = 0;
};

// Driver paths for one path id (deterministic in (model streams, seed, id)).
Eigen::MatrixXd simulate_drivers(const NoiseModel& model, long path_id, std::uint64_t seed);

// Realized b for given driver values.
Eigen::MatrixXd realize(const NoiseModel& model, const Eigen::MatrixXd& drivers);

// Simulates n_paths independent paths.  Path p uses substream p; the result
// does not depend on `threads`.
std::vector<NoisePath> simulate(const NoiseModel& model, int n_paths, std::uint64_t seed,
                                int threads = 0);

// E_{t_j}[b(r)] for all grid times r: realized values for r <= t_j, the
// affine projection with drivers frozen at t_j for r > t_j.  Output dim x n_t.
Eigen::MatrixXd conditional_expectation(const NoiseModel& model, const Eigen::MatrixXd& drivers,
                                        int t_index);

// Covariance of the group's driver values at node k (dim_g x dim_g).
Eigen::MatrixXd group_covariance(const NoiseModel& model, int group_index, int t_index);

// New model with coordinates w * b (same streams): drift' = w * drift,
// loadings'_s = w * loadings_s.  Used for block averages and spectral
// projections of label-indexed noise.
NoiseModel linear_map(const NoiseModel& model, const Eigen::MatrixXd& w);

// Driver values at the right endpoint T (one extra step beyond the last
// node), for builders that carry exact terminal-time values.  For
// custom_gaussian groups the caller supplies the Cholesky factor of the
// increment over [t_{n_t-1}, T] (terminal_chol[g]; leave empty for other
// kinds, which extend canonically).
Eigen::VectorXd drivers_at_T(const NoiseModel& model,
                             const std::vector<Eigen::MatrixXd>& terminal_chol,
                             const Eigen::MatrixXd& drivers, long path_id, std::uint64_t seed);

}  // namespace fredholm
