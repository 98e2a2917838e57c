#include "fredholm/sampling.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "fredholm/rng.hpp"

namespace fredholm {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

void require_symmetric(const Eigen::MatrixXd& w, const std::string& who) {
  require(w.rows() == w.cols(), who + ": matrix must be square");
  require((w - w.transpose()).cwiseAbs().maxCoeff() == 0.0, who + ": matrix must be symmetric");
}

// RNG group tags; `path` carries the replication-free node/pair address so a
// single seed spans every kind without stream collisions.
constexpr std::uint64_t kGroupLatent = 1;
constexpr std::uint64_t kGroupEdge = 2;

// Replicates each cell of `g` onto a finer grid whose size is an exact
// multiple of g.n_u (a step function is unchanged as a kernel).
GraphonGrid refine(const GraphonGrid& g, int n_u) {
  if (n_u == g.n_u) return g;
  const int r = n_u / g.n_u;
  GraphonGrid out;
  out.n_u = n_u;
  out.values.resize(n_u, n_u);
  for (int j = 0; j < n_u; ++j)
    for (int k = 0; k < n_u; ++k) out.values(j, k) = g.values(j / r, k / r);
  return out;
}

Eigen::MatrixXd symmetric_part(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

}  // namespace

const char* to_string(SampleKind kind) {
  switch (kind) {
    case SampleKind::S1: return "S1";
    case SampleKind::S2: return "S2";
    case SampleKind::S3: return "S3";
    case SampleKind::S4: return "S4";
  }
  return "?";
}

SampleKind parse_sample_kind(const std::string& name) {
  if (name == "S1") return SampleKind::S1;
  if (name == "S2") return SampleKind::S2;
  if (name == "S3") return SampleKind::S3;
  if (name == "S4") return SampleKind::S4;
  throw std::invalid_argument("unknown sample kind: " + name + " (expected S1..S4)");
}

bool stochastic_latents(SampleKind kind) {
  return kind == SampleKind::S2 || kind == SampleKind::S4;
}

bool bernoulli_edges(SampleKind kind) {
  return kind == SampleKind::S3 || kind == SampleKind::S4;
}

SampledGraph sample_graph(const GraphonFn& W, int N, SampleKind kind, double kappa,
                          std::uint64_t seed) {
  require(static_cast<bool>(W), "sample_graph: graphon function must be callable");
  require(N >= 2, "sample_graph: N must be at least 2");
  require(kappa > 0.0 && kappa <= 1.0, "sample_graph: kappa must lie in (0, 1]");

  SampledGraph g;
  g.N = N;
  g.kind = kind;
  g.kappa = bernoulli_edges(kind) ? kappa : 1.0;
  g.seed = seed;

  g.latents.resize(N);
  if (stochastic_latents(kind)) {
    for (int i = 0; i < N; ++i)
      g.latents[i] = u01_from_bits(rng_key(seed, static_cast<std::uint64_t>(i), kGroupLatent,
                                           0, 0));
    std::sort(g.latents.data(), g.latents.data() + N);
  } else {
    for (int i = 0; i < N; ++i) g.latents[i] = static_cast<double>(i + 1) / N;
  }

  Eigen::MatrixXd probs(N, N);
  for (int i = 0; i < N; ++i)
    for (int j = i; j < N; ++j) {
      const double p = W(g.latents[i], g.latents[j]);
      require(p >= 0.0 && p <= 1.0, "sample_graph: graphon values must lie in [0, 1]");
      probs(i, j) = p;
      probs(j, i) = p;
    }

  if (!bernoulli_edges(kind)) {
    g.matrix = std::move(probs);
    return g;
  }

  g.matrix = Eigen::MatrixXd::Zero(N, N);
  for (int i = 1; i < N; ++i)
    for (int j = 0; j < i; ++j) {
      const double u = u01_from_bits(rng_key(seed, static_cast<std::uint64_t>(i), kGroupEdge,
                                             static_cast<std::uint64_t>(j), 0));
      const double edge = (u < kappa * probs(i, j)) ? 1.0 : 0.0;
      g.matrix(i, j) = edge;
      g.matrix(j, i) = edge;
    }
  return g;
}

SampledGraph sample_graph(const GraphonGrid& W, int N, SampleKind kind, double kappa,
                          std::uint64_t seed) {
  W.validate();
  const int n_u = W.n_u;
  auto lookup = [&W, n_u](double u, double v) {
    const int j = std::min(n_u - 1, static_cast<int>(std::floor(u * n_u)));
    const int k = std::min(n_u - 1, static_cast<int>(std::floor(v * n_u)));
    return W.values(j, k);
  };
  return sample_graph(GraphonFn(lookup), N, kind, kappa, seed);
}

Eigen::MatrixXd game_weights(const SampledGraph& g) {
  Eigen::MatrixXd w = bernoulli_edges(g.kind) ? (g.matrix / g.kappa).eval() : g.matrix;
  w.diagonal().setZero();
  return w;
}

GraphonGrid step_graphon(const Eigen::MatrixXd& w, int n_u) {
  require_symmetric(w, "step_graphon");
  const int N = static_cast<int>(w.rows());
  require(N >= 1, "step_graphon: empty matrix");
  require(w.minCoeff() >= 0.0, "step_graphon: entries must be nonnegative");
  if (n_u < 0) n_u = N;
  require(n_u >= N && n_u % N == 0, "step_graphon: n_u must be a positive multiple of N");

  GraphonGrid base;
  base.n_u = N;
  base.values = w;
  return refine(base, n_u);
}

Eigen::MatrixXd block_average(const GraphonGrid& g, int N) {
  require(N >= 1 && g.n_u >= N && g.n_u % N == 0,
          "block_average: n_u must be a positive multiple of N");
  const int r = g.n_u / N;
  Eigen::MatrixXd out(N, N);
  for (int I = 0; I < N; ++I)
    for (int J = 0; J < N; ++J) {
      const auto block = g.values.block(I * r, J * r, r, r);
      // Constant blocks short-circuit to the common value so that averaging
      // inverts step_graphon bitwise.
      const double first = block(0, 0);
      out(I, J) = (block.array() == first).all() ? first : block.mean();
    }
  return out;
}

double operator_norm_diff(const GraphonGrid& w, const GraphonGrid& v) {
  require(w.n_u >= 1 && v.n_u >= 1, "operator_norm_diff: empty kernel");
  require(w.values.rows() == w.n_u && w.values.cols() == w.n_u &&
              v.values.rows() == v.n_u && v.values.cols() == v.n_u,
          "operator_norm_diff: kernel matrix size must match n_u");
  const long lcm = std::lcm(static_cast<long>(w.n_u), static_cast<long>(v.n_u));
  require(lcm <= 4096, "operator_norm_diff: grid mismatch unresolvable (common refinement " +
                           std::to_string(lcm) + " cells exceeds 4096)");
  const int n = static_cast<int>(lcm);
  const Eigen::MatrixXd diff = refine(w, n).values - refine(v, n).values;
  return symmetric_part(diff).selfadjointView<Eigen::Lower>().operatorNorm() / n;
}

CutNormResult cut_norm_step(const Eigen::MatrixXd& w) {
  require_symmetric(w, "cut_norm_step");
  const int N = static_cast<int>(w.rows());
  require(N >= 1, "cut_norm_step: empty matrix");

  if (N > 22) {
    const double op =
        symmetric_part(w).selfadjointView<Eigen::Lower>().operatorNorm() / N;
    return {op, false};
  }

  // Enumerate one side x over {0,1}^N in Gray-code order (one coordinate
  // flip per step keeps c = w^T x up to date in O(N)); the inner max over y
  // takes all positive or all negative coordinates of c.
  Eigen::VectorXd c = Eigen::VectorXd::Zero(N);
  double best = 0.0;
  std::uint32_t prev_gray = 0;
  const std::uint32_t count = 1u << N;
  for (std::uint32_t i = 1; i < count; ++i) {
    const std::uint32_t gray = i ^ (i >> 1);
    const int flipped = std::countr_zero(gray ^ prev_gray);
    const bool now_set = (gray >> flipped) & 1u;
    if (now_set)
      c += w.col(flipped);
    else
      c -= w.col(flipped);
    prev_gray = gray;
    const double plus = c.cwiseMax(0.0).sum();
    const double minus = (-c).cwiseMax(0.0).sum();
    best = std::max({best, plus, minus});
  }
  return {best / (static_cast<double>(N) * N), true};
}

SamplingBounds sampling_error_bounds(int N, double L0, double K0, double delta, double kappa,
                                     SampleKind kind) {
  require(N >= 2, "sampling_error_bounds: N must be at least 2");
  require(L0 >= 0.0 && K0 >= 0.0, "sampling_error_bounds: L0 and K0 must be nonnegative");
  require(delta > 0.0 && delta < 1.0, "sampling_error_bounds: delta must lie in (0, 1)");
  require(kappa > 0.0 && kappa <= 1.0, "sampling_error_bounds: kappa must lie in (0, 1]");

  SamplingBounds b;
  if (stochastic_latents(kind)) {
    const double lo = N * std::exp(-N / 5.0);
    const double hi = std::exp(-1.0);
    require(delta > lo && delta < hi,
            "sampling_error_bounds: stochastic latents need delta in (N e^{-N/5}, e^{-1})");
    b.d_N = 1.0 / N + std::sqrt(8.0 * std::log(N / delta) / (N + 1.0));
  } else {
    b.d_N = 1.0 / N;
  }

  const double arg = (L0 * L0 - K0 * K0) * b.d_N * b.d_N + K0 * b.d_N;
  require(arg >= 0.0, "sampling_error_bounds: bound degenerates (negative radicand); "
                      "decrease d_N or check L0, K0");
  b.rho = 2.0 * std::sqrt(arg);
  b.rho_prime = std::sqrt(4.0 * std::log(2.0 * N / delta) / (kappa * N)) + b.rho;
  return b;
}

SampledCoercivityReport sampled_coercivity_check(const KernelGrid& a_tilde,
                                                 const KernelGrid& b_tilde, double lambda,
                                                 const Eigen::MatrixXd& s, double kappa,
                                                 double c0, double tol) {
  require_symmetric(s, "sampled_coercivity_check");
  require(a_tilde.grid == b_tilde.grid, "sampled_coercivity_check: kernels must share a grid");
  require(a_tilde.n == 1 && b_tilde.n == 1,
          "sampled_coercivity_check: kernels must be scalar");
  require(kappa > 0.0 && kappa <= 1.0, "sampled_coercivity_check: kappa must lie in (0, 1]");
  const int N = static_cast<int>(s.rows());
  require(N >= 1, "sampled_coercivity_check: empty graph");

  const Eigen::MatrixXd sym_a = symmetric_part(kernel_to_operator(a_tilde).m);
  const Eigen::MatrixXd sym_b = symmetric_part(kernel_to_operator(b_tilde).m);

  // The sampled form is I (x) sym_a + P (x) sym_b with P = s / (kappa N);
  // rotating by P's eigenvectors block-diagonalizes it, so its spectrum is
  // the union over P's eigenvalues mu of spec(sym_a + mu sym_b).
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> graph_eig(s / (kappa * N),
                                                           Eigen::EigenvaluesOnly);
  require(graph_eig.info() == Eigen::Success, "sampled_coercivity_check: eigensolver failed");

  SampledCoercivityReport rep;
  rep.threshold = 0.5 * c0;
  rep.min_value = std::numeric_limits<double>::infinity();
  for (int k = 0; k < N; ++k) {
    const double mu = graph_eig.eigenvalues()[k];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> mode_eig(sym_a + mu * sym_b,
                                                            Eigen::EigenvaluesOnly);
    require(mode_eig.info() == Eigen::Success,
            "sampled_coercivity_check: eigensolver failed");
    rep.min_value = std::min(rep.min_value, lambda + mode_eig.eigenvalues().minCoeff());
  }
  rep.passed = rep.min_value >= rep.threshold - tol;
  return rep;
}

}  // namespace fredholm
