// Finite-to-continuum convergence experiments.
//
// Both experiment drivers measure the mean squared L2([0,T] x [0,1]) distance
//
//   E[ (1/n_u) sum_u sum_j dt (field(u, t_j) - step_profile(alpha)(u, t_j))^2 ]
//
// between the continuum equilibrium field of a graphon game and the
// step-function extension of an N-player equilibrium, over a common ensemble
// of driver paths (common random numbers: the same drivers feed both
// pipelines, which pairs the per-path errors and shrinks the estimator
// variance; the runs record the paired/unpaired variance ratio as a check).
//
//   run_given_sequence  solves the N-player games induced by a caller-given
//                       weight-matrix sequence (default: zero-diagonal block
//                       averages of the graphon) and reports the distance
//                       against the envelope K * (psi(N) + sqrt(cut_N)),
//                       where cut_N is the cut norm of the difference between
//                       the graphon and the step graphon of the N-th matrix.
//
//   run_sampled         draws graphs from the graphon by one of the four
//                       sampling schemes (deterministic/stochastic latents x
//                       weighted/Bernoulli edges), solves each sampled game,
//                       and reports distances against K * (pi(N) + rho(N))
//                       (weighted edges) or K * (pi(N) + rho'(N)) (Bernoulli
//                       edges, 1/kappa-rescaled games), with rho / rho' the
//                       high-probability sampling bounds at confidence delta.
//
// The envelope constant K is not a model quantity: it is fitted by
// through-origin least squares on the entries of the smallest half of the N
// list and then checked on the remaining entries ("violations" counts checked
// entries above their envelope beyond three standard errors).  Fit residuals
// are reported so the fit quality is visible.
//
// Noise term psi(N) (pi(N) for sampled runs): the N-player games take their
// noise as exact block averages of the continuum label noise, so the
// step-extension error is the block-projection residual of the label noise.
// For martingale-affine models this is computable in closed form from the
// drift/loading matrices and the driver covariances (no simulation), which is
// what noise_projection_error returns.  Label-Lipschitz models give
// psi(N) = O(1/N).
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fredholm/graphon.hpp"
#include "fredholm/noise.hpp"
#include "fredholm/sampling.hpp"
#include "fredholm/timegrid.hpp"

namespace fredholm {

// Step-function extension of an N-player profile (N x n_t) onto n_u labels:
// row u of the result is row (u * N / n_u) of alpha.  n_u must be a positive
// multiple of N.
Eigen::MatrixXd step_profile(const Eigen::MatrixXd& alpha, int n_u);

// Block-average matrix (N x n_u): row i averages the labels of block i.
// Applied to label-indexed data it produces the N-player restriction whose
// step extension is the block projection.
Eigen::MatrixXd block_average_map(int N, int n_u);

// Zero-diagonal block averages of a graphon: the canonical given-sequence
// weight matrices.  The diagonal is zeroed because player self-weights are
// excluded from the interaction; the induced step-graphon error is O(1/N).
Eigen::MatrixXd block_average_weights(const GraphonGrid& w, int N);

struct DistanceEstimate {
  double value = 0.0;      // MC mean of the per-path squared distance
  double std_error = 0.0;  // sample-sd / sqrt(paths); 0 for a single path
};

// Mean over the path ensemble of (1/n_u) sum_u sum_j dt (f - g)^2 with
// matching path pairing (f[p] and g[p] share drivers).  Both ensembles must
// have equal size and per-path dimensions n_u x n_t.
DistanceEstimate l2_field_distance(const TimeGrid& grid, const std::vector<Eigen::MatrixXd>& f,
                                   const std::vector<Eigen::MatrixXd>& g);

// sqrt( E[ (1/dim) sum_i sum_j dt b_i(t_j)^2 ] ) of a martingale-affine
// model, in closed form: drift^2 plus the loading quadratic forms against the
// per-node driver covariances.
double expected_l2_norm(const NoiseModel& model);

// Closed-form block-projection residual of label noise: expected_l2_norm of
// (I - step o average) applied to the model.  Zero when the model is a step
// function with blocks compatible with N; O(1/N) for label-Lipschitz models.
double noise_projection_error(const NoiseModel& label_noise, int N);

enum class RunMode { Given, Sampled };
const char* to_string(RunMode mode);

struct ConvergenceEntry {
  int N = 0;
  int replication = 0;
  double error = 0.0;      // squared-distance estimate (NaN when skipped)
  double std_error = 0.0;
  double norm_term = 0.0;  // sqrt(cut norm) in given mode; rho / rho' in sampled mode
  double noise_term = 0.0; // psi(N) / pi(N)
  double envelope = 0.0;   // K * (noise_term + norm_term)
  bool passed = false;     // error <= envelope + 3 std_error (+ rounding floor)
  bool skipped = false;    // Bernoulli-sampled replication excluded by the coercivity gate
  bool in_fit = false;     // entry used to fit K
  double cut_norm = 0.0;   // given mode: raw cut-norm value behind norm_term
  bool cut_exact = true;   // given mode: false when cut_norm is the operator-norm bound
  double c0 = 0.0;         // coercivity estimate of the N-player game (0 when skipped)
};

struct ConvergenceRun {
  RunMode mode = RunMode::Given;
  SampleKind kind = SampleKind::S1;  // sampled mode only
  std::vector<int> N_values;
  int replications = 1;
  int n_paths = 0;
  double delta = 0.0;  // sampled mode only
  std::uint64_t seed = 0;

  std::vector<ConvergenceEntry> entries;  // replication-major within each N

  double K = 0.0;                     // fitted envelope constant
  std::vector<double> fit_residuals;  // error - K * x over the fit entries
  int checked = 0;                    // non-fit, non-skipped entries
  int violations = 0;                 // checked entries with passed == false
  int skip_count = 0;

  double c0_common = 0.0;  // min over the N-player games and the graphon game
  double graphon_c0 = 0.0;

  // Common-random-number diagnostic at the smallest N (first replication):
  // variance of the per-path squared distance with paired drivers vs with an
  // independent continuum ensemble.  Pairing should give the smaller value.
  double paired_variance = 0.0;
  double unpaired_variance = 0.0;

  double precompute_seconds = 0.0;
  double total_seconds = 0.0;

  // Mean error over non-skipped entries at N (NaN if all skipped).
  double mean_error(int N) const;
  // Fraction of non-skipped entries at N with passed == true (NaN if none).
  double within_envelope_fraction(int N) const;
};

struct GivenSequenceConfig {
  GraphonGameSpec graphon;    // continuum reference game (grid graphon + label noise)
  std::vector<int> N_values;  // strictly increasing; each divides graphon.n_u
  // w^N source; empty means block_average_weights(graphon, N).  Must return a
  // symmetric nonnegative matrix with zero diagonal.
  std::function<Eigen::MatrixXd(int)> graph_source;
  int n_paths = 256;
  std::uint64_t seed = 1;
  double tol = 1e-8;           // first-order-condition gate for both solvers
  double energy_tol = 1e-6;    // continuum spectral truncation
  int max_rank = -1;
  double coercivity_tol = 1e-10;
  int threads = 0;
};

// Solves the continuum game once and each N-player game of the sequence on a
// common driver ensemble; fills distances, cut-norm terms, closed-form noise
// terms, the fitted envelope, and the violation count.  Throws
// assumption_error when any game (continuum or N-player) fails its
// coercivity check, invalid_argument on malformed configuration.
ConvergenceRun run_given_sequence(const GivenSequenceConfig& cfg);

struct SampledRunConfig {
  TimeGrid grid;
  KernelGrid A_tilde;  // scalar self-interaction kernel
  KernelGrid B_tilde;  // scalar interaction kernel
  double lambda = 0.0;
  GraphonFn W;             // continuous graphon; evaluated off-grid at sampled latents
  int n_u = 0;             // label resolution of the continuum reference game
  NoiseModel label_noise;  // dim n_u
  double L0 = 0.0;         // blockwise Lipschitz constant of W
  double K0 = 0.0;         // number of Lipschitz blocks minus one enters the bound as-is
  SampleKind kind = SampleKind::S1;
  std::vector<int> N_values;              // strictly increasing; each divides n_u
  std::function<double(int)> kappa_rule;  // Bernoulli kinds; empty means kappa = 1
  double delta = 0.05;                    // bound confidence, in (0, e^-1)
  int replications = 1;
  int n_paths = 256;
  std::uint64_t seed = 1;
  double tol = 1e-8;
  double energy_tol = 1e-6;
  int max_rank = -1;
  double coercivity_tol = 1e-10;
  // Reference coercivity constant for the Bernoulli-sampled gate; 0 means use
  // the continuum game's own estimate.
  double c0_reference = 0.0;
  int threads = 0;
};

// Per (N, replication): samples a graph, builds the N-player game on its
// (1/kappa-rescaled, zero-diagonal) weights with block-averaged noise, solves
// it, and measures the distance to the continuum field on the replication's
// driver ensemble.  Bernoulli kinds run the sampled coercivity gate first and
// record gate failures as skipped entries (excluded from envelope
// statistics), mirroring the confidence-delta qualification of the sampling
// bounds.  Throws invalid_argument for delta outside (0, e^-1), a kappa rule
// leaving (0, 1], or a kappa sequence with log(N)/(kappa_N N) increasing
// along the list; stochastic-latent bounds additionally require
// delta > N e^{-N/5} for every N.
ConvergenceRun run_sampled(const SampledRunConfig& cfg);

// CSV with header "N,replication,error,stderr,norm_term,noise_term,envelope,
// passed"; one row per entry, %.17g formatting (skipped entries carry nan
// error), deterministic bytes for a given run.
std::string errors_csv(const ConvergenceRun& run);

// JSON document with run-level fields (mode, K, fit residuals, violation and
// skip counts, coercivity constants, variance pairing diagnostic) and a
// per-N rollup (mean/min/median/max error, terms, envelope, within-envelope
// fraction).  Deterministic bytes for a given run; excludes wall-clock
// timings so reruns serialize identically.
std::string summary_json_text(const ConvergenceRun& run);

}  // namespace fredholm
