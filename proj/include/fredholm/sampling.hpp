// Random and deterministic graph sampling from a graphon, step-kernel
// construction, and the norm machinery used to compare a sampled graph with
// the limiting graphon.
//
// Four sampling schemes are provided.  They differ along two axes:
//
//   latents   S1/S3 place node i at the deterministic label i/N; S2/S4 draw
//             N independent uniform labels and sort them ascending.
//   edges     S1/S2 keep the evaluated probabilities W(u_i, u_j) as weighted
//             interactions; S3/S4 flip one Bernoulli(kappa * W(u_i, u_j))
//             coin per unordered pair and store the 0-1 adjacency matrix.
//
// A sampled 0-1 graph is compared against the graphon after rescaling by
// 1/kappa, which can push entries above 1.  All norm computations here accept
// such step kernels with arbitrary nonnegative values; only game construction
// requires probabilities, which is enforced at that boundary, not here.
//
// Norms: the cut norm of an N-block step kernel is computed exactly for
// N <= 22 by enumerating one side's vertex subsets and choosing the other
// side greedily by sign (the bilinear objective over [0,1]^N x [0,1]^N is
// maximized at vertices).  Larger N falls back to the operator-norm upper
// bound with `exact == false`.  The label-space operator norm of a kernel
// difference is the largest absolute eigenvalue of the measure-weighted
// difference matrix.
#pragma once

#include <cstdint>
#include <functional>

#include <Eigen/Dense>

#include "fredholm/graphon.hpp"
#include "fredholm/kernel.hpp"

namespace fredholm {

enum class SampleKind { S1, S2, S3, S4 };

const char* to_string(SampleKind kind);
SampleKind parse_sample_kind(const std::string& name);  // throws std::invalid_argument
bool stochastic_latents(SampleKind kind);                // S2 / S4
bool bernoulli_edges(SampleKind kind);                   // S3 / S4

struct SampledGraph {
  int N = 0;
  SampleKind kind = SampleKind::S1;
  // S1/S2: probability matrix W(u_i, u_j), diagonal included.
  // S3/S4: symmetric 0-1 adjacency matrix with zero diagonal.
  Eigen::MatrixXd matrix;
  Eigen::VectorXd latents;  // ascending for S2/S4
  double kappa = 1.0;       // edge-density parameter; 1 for S1/S2
  std::uint64_t seed = 0;
};

using GraphonFn = std::function<double(double, double)>;

// Draws one graph of the requested kind.  `W` must be symmetric with values
// in [0, 1]; kappa in (0, 1] (ignored for S1/S2 edge weights, recorded as 1).
// Identical arguments reproduce identical graphs.
SampledGraph sample_graph(const GraphonFn& W, int N, SampleKind kind, double kappa,
                          std::uint64_t seed);
SampledGraph sample_graph(const GraphonGrid& W, int N, SampleKind kind, double kappa,
                          std::uint64_t seed);

// Interaction weights for building the N-player game from a sampled graph:
// zero diagonal, and 1/kappa rescaling for Bernoulli kinds (entries may then
// exceed 1, which the finite-game construction accepts).
Eigen::MatrixXd game_weights(const SampledGraph& g);

// Step kernel with constant value w(I, J) on cell block (I, J) of an N x N
// partition of [0, 1]^2.  `n_u` must be a positive multiple of N (default N).
// Entries may exceed 1 (rescaled sampled graphs); symmetry is required.
GraphonGrid step_graphon(const Eigen::MatrixXd& w, int n_u = -1);

// Exact block average over an N-partition (g.n_u must be a multiple of N).
// Constant blocks are returned bitwise, so it inverts step_graphon.
Eigen::MatrixXd block_average(const GraphonGrid& g, int N);

// Largest absolute eigenvalue of the measure-weighted difference
// (1/n_u) (W - V).  Kernels on different grids are replicated onto the least
// common refinement, which must not exceed 4096 cells.
double operator_norm_diff(const GraphonGrid& w, const GraphonGrid& v);

struct CutNormResult {
  double value = 0.0;
  bool exact = true;  // false: operator-norm upper bound (N > 22)
};

// Cut norm of the step kernel with blocks w: sup over label subsets S, T of
// |integral over S x T|.  Exact for N <= 22, upper bound beyond.
CutNormResult cut_norm_step(const Eigen::MatrixXd& w);

struct SamplingBounds {
  double d_N = 0.0;       // latent-resolution term
  double rho = 0.0;       // operator-norm bound for W vs the sampled step kernel
  double rho_prime = 0.0; // same, after Bernoulli edge replacement (1/kappa scaled)
};

// High-probability sampling error bounds for a graphon with blockwise
// Lipschitz constant L0 and sup bound K0: with probability at least 1 - delta
// over the latents, |||W - W^N|||_op <= rho(N); with probability at least
// 1 - 2 delta over latents and edges, |||W - kappa^{-1} S^N|||_op <= rho'(N).
//   d_N   = 1/N                                  (deterministic latents)
//         = 1/N + sqrt(8 log(N/delta) / (N+1))   (stochastic latents)
//   rho   = 2 sqrt((L0^2 - K0^2) d_N^2 + K0 d_N)
//   rho'  = sqrt(4 log(2N/delta) / (kappa N)) + rho
// Stochastic latents require delta in (N e^{-N/5}, e^{-1}).
SamplingBounds sampling_error_bounds(int N, double L0, double K0, double delta,
                                     double kappa, SampleKind kind);

struct SampledCoercivityReport {
  double min_value = 0.0;   // min eigenvalue of the sampled coercivity form
  double threshold = 0.0;   // c0 / 2
  bool passed = false;
};

// Coercivity of the sampled game form: smallest eigenvalue over modes mu of
// s / (kappa N) of  lambda + eigmin(sym A + mu sym B), compared against
// c0 / 2.  Gates equilibrium solving for Bernoulli-sampled games, where the
// rescaled graph is only close to the graphon in norm, not entrywise.
SampledCoercivityReport sampled_coercivity_check(const KernelGrid& a_tilde,
                                                 const KernelGrid& b_tilde, double lambda,
                                                 const Eigen::MatrixXd& s, double kappa,
                                                 double c0, double tol = 0.0);

}  // namespace fredholm
