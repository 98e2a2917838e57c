#include "fredholm/examples.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <queue>
#include <stdexcept>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

namespace fredholm {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// Player i's 2 x N kernel slice (state row over G1, aggregate row over G2).
Eigen::Matrix<double, 2, Eigen::Dynamic> slice(const Eigen::MatrixXd& g1,
                                               const Eigen::MatrixXd& g2, int i) {
  Eigen::Matrix<double, 2, Eigen::Dynamic> out(2, g1.cols());
  out.row(0) = g1.row(i);
  out.row(1) = g2.row(i);
  return out;
}

Eigen::Vector2d pair_of(const Eigen::VectorXd& v, int i, int N) {
  return Eigen::Vector2d(v(i), v(N + i));
}

// Cholesky-like factor L with L L' = cov; falls back to an eigenvalue square
// root when the matrix is only semidefinite.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& cov) {
  Eigen::MatrixXd symm = 0.5 * (cov + cov.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(symm);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symm);
  Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

double sym_min_eig(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()),
                                                    Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace

Eigen::VectorXd TerminalAffine::realize(const Eigen::VectorXd& drivers_T) const {
  if (static_cast<std::size_t>(drivers_T.size()) != loadings.size())
    throw std::invalid_argument("terminal affine: driver count mismatch");
  Eigen::VectorXd out = mean;
  for (std::size_t s = 0; s < loadings.size(); ++s) out += loadings[s] * drivers_T(static_cast<Eigen::Index>(s));
  return out;
}

void VolterraGameInput::validate() const {
  require(N >= 1, "volterra input: N must be positive");
  require(grid.n_t >= 2, "volterra input: grid too small");
  require(G1.grid == grid && G2.grid == grid, "volterra input: kernel grid mismatch");
  require(G1.n == N && G2.n == N, "volterra input: kernel block dimension mismatch");
  require(G1.is_volterra && G2.is_volterra, "volterra input: state kernels must be Volterra");
  require(static_cast<int>(G1_at_T.size()) == grid.n_t &&
              static_cast<int>(G2_at_T.size()) == grid.n_t,
          "volterra input: terminal kernel row must have n_t entries");
  for (int k = 0; k < grid.n_t; ++k)
    require(G1_at_T[static_cast<std::size_t>(k)].rows() == N &&
                G1_at_T[static_cast<std::size_t>(k)].cols() == N &&
                G2_at_T[static_cast<std::size_t>(k)].rows() == N &&
                G2_at_T[static_cast<std::size_t>(k)].cols() == N,
            "volterra input: terminal kernel blocks must be N x N");
  require(static_cast<int>(p.size()) == N && static_cast<int>(Q.size()) == N &&
              static_cast<int>(q.size()) == N && static_cast<int>(S.size()) == N,
          "volterra input: per-player cost arrays must have N entries");
  for (double pi : p) require(pi > 0.0, "volterra input: control weights must be positive");
  require(d.dim == 2 * N, "volterra input: d must have dimension 2N");
  require(d.grid == grid, "volterra input: noise grid mismatch");
  d.validate();
  const int n_streams = d.total_streams();
  require(d_terminal.mean.size() == 2 * N, "volterra input: terminal mean must have dimension 2N");
  require(static_cast<int>(d_terminal.loadings.size()) == n_streams,
          "volterra input: terminal loadings must match stream count");
  for (const auto& l : d_terminal.loadings)
    require(l.size() == 2 * N, "volterra input: terminal loading dimension mismatch");
  if (s_terminal) {
    require(s_terminal->mean.size() == 2 * N,
            "volterra input: terminal cost vector must have dimension 2N");
    require(static_cast<int>(s_terminal->loadings.size()) == n_streams,
            "volterra input: terminal cost loadings must match stream count");
    for (const auto& l : s_terminal->loadings)
      require(l.size() == 2 * N, "volterra input: terminal cost loading dimension mismatch");
  }
  require(terminal_chol.size() == d.groups.size(),
          "volterra input: one terminal factor slot per noise group");
}

ReducedVolterraGame volterra_reduce(const VolterraGameInput& in) {
  in.validate();
  const int N = in.N;
  const int n_t = in.grid.n_t;
  const double dt = in.grid.dt;
  const int n_streams = in.d.total_streams();

  ReducedVolterraGame out;
  FiniteGameSpec& spec = out.spec;
  spec.grid = in.grid;
  spec.N = N;
  spec.lambda = in.p;
  spec.B = zero_kernel(in.grid, N);
  spec.Bbar = zero_kernel(in.grid, N);
  out.gamma = zero_kernel(in.grid, N);
  out.gamma.is_volterra = false;
  out.terminal_chol = in.terminal_chol;

  spec.noise.grid = in.grid;
  spec.noise.dim = N;
  spec.noise.drift = Eigen::MatrixXd::Zero(N, n_t);
  spec.noise.groups = in.d.groups;
  spec.noise.loadings.assign(static_cast<std::size_t>(n_streams),
                             Eigen::MatrixXd::Zero(N, n_t));
  NoiseModel cross;
  cross.grid = in.grid;
  cross.dim = N * N;
  cross.drift = Eigen::MatrixXd::Zero(N * N, n_t);
  cross.groups = in.d.groups;
  cross.loadings.assign(static_cast<std::size_t>(n_streams),
                        Eigen::MatrixXd::Zero(N * N, n_t));

  using Slice = Eigen::Matrix<double, 2, Eigen::Dynamic>;
  std::vector<Slice> g(static_cast<std::size_t>(n_t) * n_t);
  std::vector<Slice> sqg(static_cast<std::size_t>(n_t) * n_t);
  std::vector<Slice> gT(static_cast<std::size_t>(n_t));
  std::vector<KernelGrid> cgrids;  // per ordered pair (jp, kp) != player

  for (int i = 0; i < N; ++i) {
    const Eigen::Matrix2d symQ = in.Q[static_cast<std::size_t>(i)] +
                                 in.Q[static_cast<std::size_t>(i)].transpose();
    const Eigen::Matrix2d symS = in.S[static_cast<std::size_t>(i)] +
                                 in.S[static_cast<std::size_t>(i)].transpose();
    const Eigen::Vector2d qv = in.q[static_cast<std::size_t>(i)];

    for (int j = 0; j < n_t; ++j)
      for (int k = 0; k < n_t; ++k) {
        g[static_cast<std::size_t>(j) * n_t + k] = slice(in.G1.at(j, k), in.G2.at(j, k), i);
        sqg[static_cast<std::size_t>(j) * n_t + k] =
            symQ * g[static_cast<std::size_t>(j) * n_t + k];
      }
    for (int k = 0; k < n_t; ++k)
      gT[static_cast<std::size_t>(k)] =
          slice(in.G1_at_T[static_cast<std::size_t>(k)], in.G2_at_T[static_cast<std::size_t>(k)], i);

    // Quadratic kernel F^i on the strictly lower triangle; row/column i feed
    // the interaction kernels, the rest become objective-only cross kernels.
    cgrids.assign(static_cast<std::size_t>(N) * N, KernelGrid());
    if (N > 1)
      for (int jp = 0; jp < N; ++jp)
        for (int kp = 0; kp < N; ++kp)
          if (jp != i && kp != i)
            cgrids[static_cast<std::size_t>(jp) * N + kp] = zero_kernel(in.grid, 1);
    for (int j = 1; j < n_t; ++j)
      for (int k = 0; k < j; ++k) {
        Eigen::MatrixXd f = Eigen::MatrixXd::Zero(N, N);
        for (int l = j + 1; l < n_t; ++l)
          f.noalias() += dt * g[static_cast<std::size_t>(l) * n_t + j].transpose() *
                         sqg[static_cast<std::size_t>(l) * n_t + k];
        f.noalias() += gT[static_cast<std::size_t>(j)].transpose() * symS *
                       gT[static_cast<std::size_t>(k)];
        f.row(i) -= qv.transpose() * g[static_cast<std::size_t>(j) * n_t + k];

        spec.B.at(j, k).row(i) = f.row(i);
        spec.Bbar.at(j, k).col(i) = f.col(i);
        for (int jp = 0; jp < N; ++jp)
          for (int kp = 0; kp < N; ++kp)
            if (jp != i && kp != i)
              cgrids[static_cast<std::size_t>(jp) * N + kp].at(j, k)(0, 0) = f(jp, kp);
      }
    for (int jp = 0; jp < N; ++jp)
      for (int kp = 0; kp < N; ++kp) {
        if (jp == i || kp == i) continue;
        KernelGrid& ck = cgrids[static_cast<std::size_t>(jp) * N + kp];
        double amax = 0.0;
        for (const auto& blk : ck.values) amax = std::max(amax, blk.cwiseAbs().maxCoeff());
        if (amax > 0.0) {
          FiniteGameSpec::CrossKernel entry;
          entry.i = i;
          entry.j = jp;
          entry.k = kp;
          entry.kernel = std::move(ck);
          spec.c_kernels.push_back(std::move(entry));
        }
      }

    // Linear terms: b^i is affine in the drivers because d is; apply the same
    // linear map to the drift and to each loading column of d.
    const Eigen::Vector2d s_mean =
        in.s_terminal ? pair_of(in.s_terminal->mean, i, N) : Eigen::Vector2d::Zero();
    auto assemble = [&](const Eigen::MatrixXd& D, const Eigen::Vector2d& dT2,
                        const Eigen::Vector2d& s2) {
      Eigen::MatrixXd rows(N, n_t);
      std::vector<Eigen::Vector2d> qd(static_cast<std::size_t>(n_t));
      for (int l = 0; l < n_t; ++l)
        qd[static_cast<std::size_t>(l)] = symQ * Eigen::Vector2d(D(i, l), D(N + i, l));
      const Eigen::Vector2d term = s2 - symS * dT2;
      for (int k = 0; k < n_t; ++k) {
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(N);
        for (int l = k + 1; l < n_t; ++l)
          acc.noalias() -=
              dt * g[static_cast<std::size_t>(l) * n_t + k].transpose() * qd[static_cast<std::size_t>(l)];
        acc.noalias() += gT[static_cast<std::size_t>(k)].transpose() * term;
        acc(i) += qv.dot(Eigen::Vector2d(D(i, k), D(N + i, k)));
        rows.col(k) = acc;
      }
      return rows;
    };

    const Eigen::MatrixXd bd = assemble(in.d.drift, pair_of(in.d_terminal.mean, i, N), s_mean);
    spec.noise.drift.row(i) = bd.row(i);
    for (int j = 0; j < N; ++j)
      if (j != i) cross.drift.row(static_cast<Eigen::Index>(i) * N + j) = bd.row(j);
    for (int s = 0; s < n_streams; ++s) {
      const Eigen::Vector2d dT2 = pair_of(in.d_terminal.loadings[static_cast<std::size_t>(s)], i, N);
      const Eigen::Vector2d s2 =
          in.s_terminal ? pair_of(in.s_terminal->loadings[static_cast<std::size_t>(s)], i, N)
                        : Eigen::Vector2d::Zero();
      const Eigen::MatrixXd bl = assemble(in.d.loadings[static_cast<std::size_t>(s)], dT2, s2);
      spec.noise.loadings[static_cast<std::size_t>(s)].row(i) = bl.row(i);
      for (int j = 0; j < N; ++j)
        if (j != i)
          cross.loadings[static_cast<std::size_t>(s)].row(static_cast<Eigen::Index>(i) * N + j) =
              bl.row(j);
    }
  }

  for (int j = 0; j < n_t; ++j)
    for (int k = 0; k < n_t; ++k)
      out.gamma.at(j, k) = spec.B.at(j, k) + spec.Bbar.at(k, j).transpose();

  if (N > 1) spec.cross_b = std::move(cross);
  spec.validate();
  return out;
}

Eigen::MatrixXd volterra_states(const VolterraGameInput& in, const Eigen::MatrixXd& alpha,
                                const Eigen::MatrixXd& d_realized) {
  const int N = in.N;
  const int n_t = in.grid.n_t;
  require(alpha.rows() == N && alpha.cols() == n_t, "volterra states: control shape mismatch");
  require(d_realized.rows() == 2 * N && d_realized.cols() == n_t,
          "volterra states: d path shape mismatch");
  Eigen::MatrixXd y = d_realized;
  for (int j = 0; j < n_t; ++j)
    for (int k = 0; k < j; ++k) {
      y.col(j).head(N).noalias() += in.grid.dt * in.G1.at(j, k) * alpha.col(k);
      y.col(j).tail(N).noalias() += in.grid.dt * in.G2.at(j, k) * alpha.col(k);
    }
  return y;
}

Eigen::VectorXd volterra_terminal_state(const VolterraGameInput& in,
                                        const Eigen::MatrixXd& alpha,
                                        const Eigen::VectorXd& d_T) {
  const int N = in.N;
  require(d_T.size() == 2 * N, "volterra terminal state: d_T dimension mismatch");
  Eigen::VectorXd y = d_T;
  for (int k = 0; k < in.grid.n_t; ++k) {
    y.head(N).noalias() += in.grid.dt * in.G1_at_T[static_cast<std::size_t>(k)] * alpha.col(k);
    y.tail(N).noalias() += in.grid.dt * in.G2_at_T[static_cast<std::size_t>(k)] * alpha.col(k);
  }
  return y;
}

double volterra_direct_objective(const VolterraGameInput& in, int player,
                                 const Eigen::MatrixXd& alpha,
                                 const Eigen::MatrixXd& d_realized,
                                 const Eigen::VectorXd& d_T,
                                 const Eigen::VectorXd& s_realized) {
  const int N = in.N;
  require(player >= 0 && player < N, "volterra objective: player out of range");
  require(s_realized.size() == 2 * N, "volterra objective: terminal cost dimension mismatch");
  const Eigen::MatrixXd y = volterra_states(in, alpha, d_realized);
  const Eigen::VectorXd yT = volterra_terminal_state(in, alpha, d_T);
  const Eigen::Matrix2d& Q = in.Q[static_cast<std::size_t>(player)];
  const Eigen::Matrix2d& S = in.S[static_cast<std::size_t>(player)];
  const Eigen::Vector2d& qv = in.q[static_cast<std::size_t>(player)];
  double val = 0.0;
  for (int j = 0; j < in.grid.n_t; ++j) {
    const Eigen::Vector2d yi(y(player, j), y(N + player, j));
    const double a = alpha(player, j);
    val += in.grid.dt * (-in.p[static_cast<std::size_t>(player)] * a * a - yi.dot(Q * yi) +
                         a * qv.dot(yi));
  }
  const Eigen::Vector2d yiT(yT(player), yT(N + player));
  const Eigen::Vector2d si(s_realized(player), s_realized(N + player));
  val += -yiT.dot(S * yiT) + yiT.dot(si);
  return val;
}

Eigen::VectorXd volterra_c_offsets(const VolterraGameInput& in,
                                   const Eigen::MatrixXd& d_realized,
                                   const Eigen::VectorXd& d_T,
                                   const Eigen::VectorXd& s_realized) {
  const int N = in.N;
  require(d_realized.rows() == 2 * N, "volterra offsets: d path shape mismatch");
  Eigen::VectorXd c = Eigen::VectorXd::Zero(N);
  for (int i = 0; i < N; ++i) {
    const Eigen::Matrix2d& Q = in.Q[static_cast<std::size_t>(i)];
    const Eigen::Matrix2d& S = in.S[static_cast<std::size_t>(i)];
    double v = 0.0;
    for (int j = 0; j < in.grid.n_t; ++j) {
      const Eigen::Vector2d di(d_realized(i, j), d_realized(N + i, j));
      v -= in.grid.dt * di.dot(Q * di);
    }
    const Eigen::Vector2d dTi(d_T(i), d_T(N + i));
    const Eigen::Vector2d si(s_realized(i), s_realized(N + i));
    v += -dTi.dot(S * dTi) + dTi.dot(si);
    c(i) = v;
  }
  return c;
}

LinearVolterraSystem build_linear_volterra(const KernelGrid& H, const KernelGrid& K,
                                           const Eigen::MatrixXd& w) {
  require(H.grid == K.grid && H.n == K.n, "linear volterra: kernel grids must match");
  require(H.is_volterra && K.is_volterra, "linear volterra: kernels must be Volterra");
  require(w.rows() == K.n && w.cols() == K.n, "linear volterra: weight matrix shape mismatch");
  KernelGrid combined = H;
  for (int j = 0; j < H.grid.n_t; ++j)
    for (int k = 0; k < j; ++k) combined.at(j, k).noalias() += K.at(j, k) * w;
  LinearVolterraSystem sys;
  sys.resolvent = volterra_resolvent(combined);
  return sys;
}

Eigen::MatrixXd linear_volterra_path(const LinearVolterraSystem& sys, const Eigen::MatrixXd& m) {
  const KernelGrid& r = sys.resolvent;
  require(m.rows() == r.n && m.cols() == r.grid.n_t, "linear volterra: forcing shape mismatch");
  Eigen::MatrixXd x = m;
  for (int j = 0; j < r.grid.n_t; ++j)
    for (int k = 0; k < j; ++k) x.col(j).noalias() -= r.grid.dt * r.at(j, k) * m.col(k);
  return x;
}

KernelGrid effective_control_kernel(const LinearVolterraSystem& sys, const KernelGrid& L) {
  require(L.grid == sys.resolvent.grid && L.n == sys.resolvent.n,
          "effective control kernel: grid mismatch");
  const KernelGrid rl = star_product(sys.resolvent, L);
  KernelGrid out = L;
  for (int j = 0; j < L.grid.n_t; ++j)
    for (int k = 0; k < L.grid.n_t; ++k) out.at(j, k) -= rl.at(j, k);
  return out;
}

void SystemicRiskInput::validate() const {
  require(N >= 1, "lending game: N must be positive");
  require(grid.n_t >= 2, "lending game: grid too small");
  require(!nu.empty(), "lending game: lending measure needs at least one atom");
  for (const auto& atom : nu)
    require(atom.first >= 0.0 && atom.first <= grid.T + 1e-12 * std::max(1.0, grid.T),
            "lending game: atom times must lie in [0, T]");
  require(w_sys.rows() == N && w_sys.cols() == N, "lending game: w shape mismatch");
  require(w_sys.minCoeff() >= 0.0, "lending game: w entries must be nonnegative");
  require(kappa.size() == N && epsilon.size() == N && c.size() == N && xi.size() == N,
          "lending game: coefficient vectors must have N entries");
  for (int i = 0; i < N; ++i) {
    require(epsilon(i) > 0.0, "lending game: epsilon must be positive");
    require(c(i) >= 0.0, "lending game: terminal weight must be nonnegative");
    require(kappa(i) >= 0.0, "lending game: incentive weight must be nonnegative");
    require(kappa(i) * kappa(i) < epsilon(i),
            "lending game: requires kappa^2 < epsilon");
  }
  require(h.rows() == N && h.cols() == grid.n_t, "lending game: drift shape mismatch");
  require(V.dim == N, "lending game: noise dimension mismatch");
  require(V.grid == grid, "lending game: noise grid mismatch");
  V.validate();
  if (v_terminal) {
    require(v_terminal->mean.size() == N, "lending game: terminal noise mean dimension");
    require(static_cast<int>(v_terminal->loadings.size()) == V.total_streams(),
            "lending game: terminal noise loading count");
  }
}

VolterraGameInput systemic_risk_build(const SystemicRiskInput& in) {
  in.validate();
  const int N = in.N;
  const int n_t = in.grid.n_t;
  const double dt = in.grid.dt;

  // Snap atoms to grid multiples of dt; nu([0, m dt]) then only needs the
  // integer atom positions.
  std::vector<std::pair<long, double>> atoms;
  for (const auto& atom : in.nu) {
    const long m = std::lround(atom.first / dt);
    if (std::abs(atom.first - static_cast<double>(m) * dt) >
        1e-12 * std::max(1.0, in.grid.T))
      std::fprintf(stderr,
                   "lending game: atom at %.17g snapped to grid time %.17g\n",
                   atom.first, static_cast<double>(m) * dt);
    atoms.emplace_back(m, atom.second);
  }
  auto nu_mass = [&](long lag) {
    double v = 0.0;
    for (const auto& a : atoms)
      if (a.first <= lag) v += a.second;
    return v;
  };

  VolterraGameInput out;
  out.grid = in.grid;
  out.N = N;
  out.G1 = zero_kernel(in.grid, N);
  out.G2 = zero_kernel(in.grid, N);
  out.G1_at_T.assign(static_cast<std::size_t>(n_t), Eigen::MatrixXd::Zero(N, N));
  out.G2_at_T.assign(static_cast<std::size_t>(n_t), Eigen::MatrixXd::Zero(N, N));
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(N, N);
  for (int j = 0; j < n_t; ++j) {
    for (int k = 0; k < j; ++k) {
      const double m = nu_mass(j - k);
      if (m != 0.0) {
        out.G1.at(j, k) = m * eye;
        out.G2.at(j, k) = m * in.w_sys;
      }
    }
  }
  for (int k = 0; k < n_t; ++k) {
    const double m = nu_mass(n_t - k);
    out.G1_at_T[static_cast<std::size_t>(k)] = m * eye;
    out.G2_at_T[static_cast<std::size_t>(k)] = m * in.w_sys;
  }

  out.p.assign(static_cast<std::size_t>(N), 0.5);
  out.Q.resize(static_cast<std::size_t>(N));
  out.q.resize(static_cast<std::size_t>(N));
  out.S.resize(static_cast<std::size_t>(N));
  Eigen::Matrix2d spread;
  spread << 1.0, -1.0, -1.0, 1.0;
  for (int i = 0; i < N; ++i) {
    out.Q[static_cast<std::size_t>(i)] = 0.5 * in.epsilon(i) * spread;
    out.S[static_cast<std::size_t>(i)] = 0.5 * in.c(i) * spread;
    out.q[static_cast<std::size_t>(i)] = in.kappa(i) * Eigen::Vector2d(-1.0, 1.0);
  }

  // Uncontrolled states P_i = xi_i + int_0^t h_i + V_i; aggregates R = w P.
  NoiseModel pmodel;
  pmodel.grid = in.grid;
  pmodel.dim = N;
  pmodel.drift = in.V.drift;
  Eigen::VectorXd cum = in.xi;
  for (int j = 0; j < n_t; ++j) {
    pmodel.drift.col(j) += cum;
    cum += dt * in.h.col(j);
  }
  pmodel.groups = in.V.groups;
  pmodel.loadings = in.V.loadings;
  Eigen::MatrixXd stack(2 * N, N);
  stack.topRows(N) = eye;
  stack.bottomRows(N) = in.w_sys;
  out.d = linear_map(pmodel, stack);

  TerminalAffine vterm;
  if (in.v_terminal) {
    vterm = *in.v_terminal;
  } else {
    vterm.mean = in.V.drift.col(n_t - 1);
    for (const auto& l : in.V.loadings) vterm.loadings.push_back(l.col(n_t - 1));
  }
  out.d_terminal.mean = stack * (cum + vterm.mean);
  for (const auto& l : vterm.loadings) out.d_terminal.loadings.push_back(stack * l);
  out.terminal_chol.assign(in.V.groups.size(), Eigen::MatrixXd());
  out.validate();
  return out;
}

SystemicAssumptionReport systemic_assumption_check(const SystemicRiskInput& in,
                                                   double horizon) {
  in.validate();
  const int N = in.N;
  const double T = horizon > 0.0 ? horizon : in.grid.T;
  const double wtol = 1e-12;

  // Recognize nu = delta_0 - delta_tau (or plain delta_0 / repayment beyond
  // the horizon).
  require(!in.nu.empty() && std::abs(in.nu[0].first) <= wtol &&
              std::abs(in.nu[0].second - 1.0) <= wtol,
          "assumption check: nu must start with a unit atom at 0");
  bool delay = false;
  if (in.nu.size() == 2) {
    require(std::abs(in.nu[1].second + 1.0) <= wtol && in.nu[1].first > 0.0,
            "assumption check: second atom must be -1 at the repayment time");
    delay = in.nu[1].first <= T + wtol;
  } else {
    require(in.nu.size() == 1, "assumption check: nu must be delta_0 - delta_tau");
  }

  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(N, N);
  const Eigen::MatrixXd dw = in.w_sys.diagonal().asDiagonal();
  const Eigen::MatrixXd core = (I - dw) * (I - in.w_sys);
  const Eigen::MatrixXd km =
      in.kappa.asDiagonal() * (2.0 * I - in.w_sys - dw);

  SystemicAssumptionReport rep;
  rep.delay_branch = delay;
  rep.eps_min_eig = sym_min_eig(in.epsilon.asDiagonal() * core);
  rep.c_min_eig = sym_min_eig(in.c.asDiagonal() * core);
  const double tol = 1e-12 * (1.0 + in.w_sys.norm());
  rep.eps_psd = rep.eps_min_eig >= -tol * in.epsilon.maxCoeff();
  rep.c_psd = rep.c_min_eig >= -tol * std::max(1.0, in.c.maxCoeff());
  rep.kappa_norm = km.norm();
  rep.kappa_lhs = 0.5 * T * rep.kappa_norm;
  rep.critical_T = rep.kappa_norm > 0.0 ? 2.0 / rep.kappa_norm
                                        : std::numeric_limits<double>::infinity();
  rep.kappa_min_eig = sym_min_eig(km);
  rep.kappa_ok = delay ? (rep.kappa_lhs < 1.0) : (rep.kappa_min_eig >= -tol);
  rep.passed = rep.eps_psd && rep.c_psd && rep.kappa_ok;
  return rep;
}

namespace {

// Shared assembly for models with state dX = (A X + Bctl alpha) dt
// + sigma dB and aggregate Z = mix X: exact Gaussian representation via the
// martingale M_t = int_0^t e^{-As} sigma dB_s, so that the uncontrolled state
// is e^{At}(xi + M_t) and the control response kernel is e^{A(t-s)} Bctl.
VolterraGameInput ou_game_input(const TimeGrid& grid, const Eigen::MatrixXd& A,
                                const Eigen::MatrixXd& Bctl, const Eigen::MatrixXd& mix,
                                double sigma, const Eigen::VectorXd& xi,
                                const std::string& tag) {
  const int N = static_cast<int>(A.rows());
  const int n_t = grid.n_t;
  const double dt = grid.dt;

  std::vector<Eigen::MatrixXd> lag(static_cast<std::size_t>(n_t) + 1);
  std::vector<Eigen::MatrixXd> neg(static_cast<std::size_t>(n_t));
  const Eigen::MatrixXd e1 = (A * dt).exp();
  const Eigen::MatrixXd em1 = (-A * dt).exp();
  lag[0] = Eigen::MatrixXd::Identity(N, N);
  for (int m = 1; m <= n_t; ++m) lag[static_cast<std::size_t>(m)] = lag[static_cast<std::size_t>(m) - 1] * e1;
  neg[0] = Eigen::MatrixXd::Identity(N, N);
  for (int m = 1; m < n_t; ++m) neg[static_cast<std::size_t>(m)] = neg[static_cast<std::size_t>(m) - 1] * em1;

  // One-step covariance of M: C = int_0^dt e^{-Au} (sigma^2 I) e^{-A'u} du,
  // read off a block matrix exponential.
  Eigen::MatrixXd block = Eigen::MatrixXd::Zero(2 * N, 2 * N);
  block.topLeftCorner(N, N) = -A;
  block.topRightCorner(N, N) = sigma * sigma * Eigen::MatrixXd::Identity(N, N);
  block.bottomRightCorner(N, N) = A.transpose();
  const Eigen::MatrixXd f = (block * dt).exp();
  const Eigen::MatrixXd cstep = f.topRightCorner(N, N) * em1.transpose();

  StreamGroup group;
  group.kind = StreamKind::CustomGaussian;
  group.dim = N;
  group.common = false;
  group.tag = tag;
  group.step_chol.resize(static_cast<std::size_t>(n_t) - 1);
  for (int k = 0; k + 1 < n_t; ++k)
    group.step_chol[static_cast<std::size_t>(k)] =
        psd_factor(neg[static_cast<std::size_t>(k)] * cstep *
                   neg[static_cast<std::size_t>(k)].transpose());
  const Eigen::MatrixXd terminal_factor =
      psd_factor(neg[static_cast<std::size_t>(n_t) - 1] * cstep *
                 neg[static_cast<std::size_t>(n_t) - 1].transpose());

  VolterraGameInput out;
  out.grid = grid;
  out.N = N;
  out.G1 = zero_kernel(grid, N);
  out.G2 = zero_kernel(grid, N);
  out.G1_at_T.resize(static_cast<std::size_t>(n_t));
  out.G2_at_T.resize(static_cast<std::size_t>(n_t));
  for (int j = 0; j < n_t; ++j)
    for (int k = 0; k < j; ++k) {
      out.G1.at(j, k) = lag[static_cast<std::size_t>(j - k)] * Bctl;
      out.G2.at(j, k) = mix * out.G1.at(j, k);
    }
  for (int k = 0; k < n_t; ++k) {
    out.G1_at_T[static_cast<std::size_t>(k)] = lag[static_cast<std::size_t>(n_t - k)] * Bctl;
    out.G2_at_T[static_cast<std::size_t>(k)] = mix * out.G1_at_T[static_cast<std::size_t>(k)];
  }

  NoiseModel pmodel;
  pmodel.grid = grid;
  pmodel.dim = N;
  pmodel.drift.resize(N, n_t);
  pmodel.groups = {group};
  pmodel.loadings.assign(static_cast<std::size_t>(N), Eigen::MatrixXd::Zero(N, n_t));
  for (int j = 0; j < n_t; ++j) {
    pmodel.drift.col(j) = lag[static_cast<std::size_t>(j)] * xi;
    for (int s = 0; s < N; ++s)
      pmodel.loadings[static_cast<std::size_t>(s)].col(j) = lag[static_cast<std::size_t>(j)].col(s);
  }
  Eigen::MatrixXd stack(2 * N, N);
  stack.topRows(N) = Eigen::MatrixXd::Identity(N, N);
  stack.bottomRows(N) = mix;
  out.d = linear_map(pmodel, stack);
  out.d_terminal.mean = stack * (lag[static_cast<std::size_t>(n_t)] * xi);
  for (int s = 0; s < N; ++s)
    out.d_terminal.loadings.push_back(stack * lag[static_cast<std::size_t>(n_t)].col(s));
  out.terminal_chol = {terminal_factor};
  return out;
}

}  // namespace

void NetworkSDEInput::validate() const {
  require(N >= 1, "network game: N must be positive");
  require(grid.n_t >= 2, "network game: grid too small");
  require(a.size() == N && b.size() == N && c.size() == N && xi.size() == N,
          "network game: coefficient vectors must have N entries");
  require(w_net.rows() == N && w_net.cols() == N, "network game: w shape mismatch");
  require(w_net.minCoeff() >= 0.0 && w_net.maxCoeff() <= 1.0,
          "network game: w entries must lie in [0, 1]");
  require((w_net - w_net.transpose()).cwiseAbs().maxCoeff() <= 1e-12,
          "network game: w must be symmetric");
  require(static_cast<int>(C_f.size()) == N && static_cast<int>(C_g.size()) == N,
          "network game: cost matrices must have N entries");
  for (int i = 0; i < N; ++i) {
    require((C_f[static_cast<std::size_t>(i)] - C_f[static_cast<std::size_t>(i)].transpose())
                    .cwiseAbs()
                    .maxCoeff() <= 1e-12,
            "network game: running cost matrix must be symmetric");
    require((C_g[static_cast<std::size_t>(i)] - C_g[static_cast<std::size_t>(i)].transpose())
                    .cwiseAbs()
                    .maxCoeff() <= 1e-12,
            "network game: terminal cost matrix must be symmetric");
    require(C_f[static_cast<std::size_t>(i)](1, 1) > 0.0,
            "network game: control cost entry of the running cost must be positive");
  }
  require(sigma > 0.0, "network game: noise scale must be positive");
}

VolterraGameInput network_sde_build(const NetworkSDEInput& in) {
  in.validate();
  const int N = in.N;
  const Eigen::MatrixXd A =
      Eigen::MatrixXd(in.a.asDiagonal()) +
      Eigen::MatrixXd(in.c.asDiagonal()) * in.w_net / static_cast<double>(N);
  VolterraGameInput out =
      ou_game_input(in.grid, A, Eigen::MatrixXd(in.b.asDiagonal()),
                    in.w_net / static_cast<double>(N), in.sigma, in.xi, "network-ou");
  out.p.resize(static_cast<std::size_t>(N));
  out.Q.resize(static_cast<std::size_t>(N));
  out.q.resize(static_cast<std::size_t>(N));
  out.S.resize(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) {
    const Eigen::Matrix3d& cf = in.C_f[static_cast<std::size_t>(i)];
    out.p[static_cast<std::size_t>(i)] = 0.5 * cf(1, 1);
    Eigen::Matrix2d Q;
    Q << cf(0, 0), cf(0, 2), cf(2, 0), cf(2, 2);
    out.Q[static_cast<std::size_t>(i)] = 0.5 * Q;
    out.q[static_cast<std::size_t>(i)] = -Eigen::Vector2d(cf(0, 1), cf(1, 2));
    out.S[static_cast<std::size_t>(i)] = 0.5 * in.C_g[static_cast<std::size_t>(i)];
  }
  out.validate();
  return out;
}

Eigen::MatrixXd normalized_laplacian(int N, const std::vector<std::pair<int, int>>& edges) {
  require(N >= 1, "laplacian: N must be positive");
  Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(N, N);
  for (const auto& e : edges) {
    require(e.first >= 0 && e.first < N && e.second >= 0 && e.second < N,
            "laplacian: vertex out of range");
    require(e.first != e.second, "laplacian: loops are not allowed");
    require(adj(e.first, e.second) == 0.0, "laplacian: duplicate edge");
    adj(e.first, e.second) = 1.0;
    adj(e.second, e.first) = 1.0;
  }
  // Connectivity (BFS from vertex 0).
  std::vector<char> seen(static_cast<std::size_t>(N), 0);
  std::queue<int> frontier;
  frontier.push(0);
  seen[0] = 1;
  int count = 1;
  while (!frontier.empty()) {
    const int v = frontier.front();
    frontier.pop();
    for (int u = 0; u < N; ++u)
      if (adj(v, u) != 0.0 && !seen[static_cast<std::size_t>(u)]) {
        seen[static_cast<std::size_t>(u)] = 1;
        ++count;
        frontier.push(u);
      }
  }
  require(count == N, "laplacian: graph must be connected");
  const Eigen::VectorXd deg = adj.rowwise().sum();
  Eigen::MatrixXd lap = Eigen::MatrixXd::Identity(N, N);
  if (N == 1) return lap;  // single vertex, no edges possible after the check
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      if (adj(i, j) != 0.0) lap(i, j) = -1.0 / std::sqrt(deg(i) * deg(j));
  return lap;
}

void SimpleGraphInput::validate() const {
  require(N >= 1, "graph game: N must be positive");
  require(grid.n_t >= 2, "graph game: grid too small");
  require(a_bar >= 0.0, "graph game: mean-reversion rate must be nonnegative");
  require(sigma_bar > 0.0, "graph game: noise scale must be positive");
  require(eps_sim >= 0.0 && c_sim >= 0.0, "graph game: cost weights must be nonnegative");
  require(q_sim * q_sim <= eps_sim, "graph game: requires q^2 <= epsilon");
  require(xi.size() == N, "graph game: initials must have N entries");
}

VolterraGameInput simple_graph_build(const SimpleGraphInput& in) {
  in.validate();
  const int N = in.N;
  const Eigen::MatrixXd lap = normalized_laplacian(N, in.edges);
  VolterraGameInput out =
      ou_game_input(in.grid, -in.a_bar * lap, Eigen::MatrixXd::Identity(N, N),
                    Eigen::MatrixXd::Identity(N, N) - lap, in.sigma_bar, in.xi, "graph-ou");
  Eigen::Matrix2d spread;
  spread << 1.0, -1.0, -1.0, 1.0;
  out.p.assign(static_cast<std::size_t>(N), 0.5);
  out.Q.assign(static_cast<std::size_t>(N), 0.5 * in.eps_sim * spread);
  out.S.assign(static_cast<std::size_t>(N), 0.5 * in.c_sim * spread);
  out.q.assign(static_cast<std::size_t>(N), in.q_sim * Eigen::Vector2d(-1.0, 1.0));
  out.validate();
  return out;
}

}  // namespace fredholm
