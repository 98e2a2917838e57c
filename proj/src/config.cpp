#include "fredholm/config.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "fredholm/errors.hpp"

namespace fredholm {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& msg) {
  throw schema_error(where + ": " + msg);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
  for (const auto& item : j.items())
    if (!allowed.count(item.key())) fail(where, "unknown key '" + item.key() + "'");
}

const json& require_key(const json& j, const std::string& key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) fail(where, "missing required key '" + key + "'");
  return *it;
}

double get_double(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  return j.get<double>();
}

double get_double(const json& j, const std::string& key, const std::string& where) {
  return get_double(require_key(j, key, where), where + "." + key);
}

double get_double_or(const json& j, const std::string& key, double fallback,
                     const std::string& where) {
  auto it = j.find(key);
  return it == j.end() ? fallback : get_double(*it, where + "." + key);
}

long long get_int(const json& j, const std::string& where) {
  if (!j.is_number_integer()) fail(where, "expected an integer");
  return j.get<long long>();
}

long long get_int(const json& j, const std::string& key, const std::string& where) {
  return get_int(require_key(j, key, where), where + "." + key);
}

long long get_int_or(const json& j, const std::string& key, long long fallback,
                     const std::string& where) {
  auto it = j.find(key);
  return it == j.end() ? fallback : get_int(*it, where + "." + key);
}

std::string get_string(const json& j, const std::string& key, const std::string& where) {
  const json& v = require_key(j, key, where);
  if (!v.is_string()) fail(where + "." + key, "expected a string");
  return v.get<std::string>();
}

Eigen::MatrixXd matrix_from_json(const json& j, long long rows, long long cols,
                                 const std::string& where) {
  if (!j.is_array() || j.empty()) fail(where, "expected a non-empty array of rows");
  const std::size_t r = j.size();
  if (rows >= 0 && r != static_cast<std::size_t>(rows))
    fail(where, "expected " + std::to_string(rows) + " rows, got " + std::to_string(r));
  if (!j[0].is_array() || j[0].empty()) fail(where, "expected rows to be arrays of numbers");
  const std::size_t c = j[0].size();
  if (cols >= 0 && c != static_cast<std::size_t>(cols))
    fail(where, "expected " + std::to_string(cols) + " columns, got " + std::to_string(c));
  Eigen::MatrixXd m(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    if (!j[i].is_array() || j[i].size() != c) fail(where, "ragged rows");
    for (std::size_t k = 0; k < c; ++k)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          get_double(j[i][k], where + "[" + std::to_string(i) + "][" + std::to_string(k) + "]");
  }
  return m;
}

// Scalar broadcast or explicit array of length n.
Eigen::VectorXd vector_from_json(const json& j, int n, const std::string& where) {
  if (j.is_number()) return Eigen::VectorXd::Constant(n, j.get<double>());
  if (!j.is_array() || j.size() != static_cast<std::size_t>(n))
    fail(where, "expected a number or an array of length " + std::to_string(n));
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = get_double(j[i], where + "[" + std::to_string(i) + "]");
  return v;
}

json json_from_matrix(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(row);
  }
  return rows;
}

Tolerances tolerances_from_config(const json& j, const std::string& where) {
  check_keys(j, {"tol", "energy_tol", "max_rank", "coercivity_tol"}, where);
  Tolerances t;
  t.tol = get_double_or(j, "tol", t.tol, where);
  t.energy_tol = get_double_or(j, "energy_tol", t.energy_tol, where);
  t.max_rank = static_cast<int>(get_int_or(j, "max_rank", t.max_rank, where));
  t.coercivity_tol = get_double_or(j, "coercivity_tol", t.coercivity_tol, where);
  if (t.tol <= 0) fail(where + ".tol", "must be positive");
  if (t.energy_tol < 0) fail(where + ".energy_tol", "must be nonnegative");
  if (t.max_rank < -1) fail(where + ".max_rank", "must be -1 (full) or nonnegative");
  if (t.coercivity_tol < 0) fail(where + ".coercivity_tol", "must be nonnegative");
  return t;
}

Eigen::MatrixXd weights_from_config(const json& j, int N, const std::string& where);

GameSection game_from_config(const json& j, const TimeGrid& grid, const std::string& where) {
  GameSection out;
  if (j.contains("family")) {
    check_keys(j, {"family", "params"}, where);
    out.family = family_from_config(get_string(j, "family", where),
                                    require_key(j, "params", where), grid);
    return out;
  }
  check_keys(j, {"players", "lambda", "self_kernel", "cross_kernel", "weights", "noise"}, where);
  const int N = static_cast<int>(get_int(j, "players", where));
  if (N < 1) fail(where + ".players", "must be a positive integer");
  const double lambda = get_double(j, "lambda", where);
  if (lambda <= 0) fail(where + ".lambda", "must be positive");
  const KernelGrid a =
      kernel_from_config(require_key(j, "self_kernel", where), grid, where + ".self_kernel");
  const KernelGrid b =
      kernel_from_config(require_key(j, "cross_kernel", where), grid, where + ".cross_kernel");
  const Eigen::MatrixXd w =
      weights_from_config(require_key(j, "weights", where), N, where + ".weights");
  const NoiseModel noise =
      noise_from_config(require_key(j, "noise", where), N, grid, where + ".noise");
  out.graph_form = build_from_graph(a, b, lambda, w, noise);
  return out;
}

GraphonSection graphon_from_config_section(const json& j, const TimeGrid& grid, int n_u,
                                           const std::string& where) {
  check_keys(j, {"lambda", "self_kernel", "cross_kernel", "graphon", "noise"}, where);
  if (n_u < 1) fail("grid.n_u", "required (positive) when a graphon section is present");
  GraphonSection out;
  out.spec.grid = grid;
  out.spec.lambda = get_double(j, "lambda", where);
  if (out.spec.lambda <= 0) fail(where + ".lambda", "must be positive");
  out.spec.A_tilde =
      kernel_from_config(require_key(j, "self_kernel", where), grid, where + ".self_kernel");
  out.spec.B_tilde =
      kernel_from_config(require_key(j, "cross_kernel", where), grid, where + ".cross_kernel");
  out.fn = graphon_from_config(require_key(j, "graphon", where), n_u, out.spec.graphon,
                               where + ".graphon");
  out.spec.noise = noise_from_config(require_key(j, "noise", where), n_u, grid, where + ".noise");
  out.spec.validate();
  return out;
}

std::pair<double, double> lipschitz_from_config(const json& j, const std::string& where) {
  check_keys(j, {"L0", "K0"}, where);
  const double l0 = get_double(j, "L0", where);
  const double k0 = get_double(j, "K0", where);
  if (l0 < 0) fail(where + ".L0", "must be nonnegative");
  if (k0 <= 0) fail(where + ".K0", "must be positive");
  return {l0, k0};
}

SamplingSection sampling_from_config(const json& j, const std::string& where) {
  check_keys(j, {"nodes", "kind", "kappa", "delta", "lipschitz"}, where);
  SamplingSection out;
  out.nodes = static_cast<int>(get_int(j, "nodes", where));
  if (out.nodes < 1) fail(where + ".nodes", "must be a positive integer");
  out.kind = parse_sample_kind(get_string(j, "kind", where));
  out.kappa = get_double_or(j, "kappa", 1.0, where);
  if (!(out.kappa > 0.0 && out.kappa <= 1.0)) fail(where + ".kappa", "must lie in (0, 1]");
  out.delta = get_double_or(j, "delta", 0.05, where);
  if (!(out.delta > 0.0 && out.delta < 1.0)) fail(where + ".delta", "must lie in (0, 1)");
  if (j.contains("lipschitz")) {
    std::tie(out.L0, out.K0) = lipschitz_from_config(j["lipschitz"], where + ".lipschitz");
    out.has_lipschitz = true;
  }
  return out;
}

std::function<double(int)> kappa_rule_from_config(const json& j, const std::string& where) {
  check_keys(j, {"name", "value"}, where);
  const std::string name = get_string(j, "name", where);
  if (name == "constant") {
    const double v = get_double(j, "value", where);
    if (!(v > 0.0 && v <= 1.0)) fail(where + ".value", "must lie in (0, 1]");
    return [v](int) { return v; };
  }
  if (name == "log_sq_over_n") {
    if (j.contains("value")) fail(where, "'log_sq_over_n' takes no 'value'");
    return [](int N) { return std::log(N) * std::log(N) / N; };
  }
  fail(where + ".name", "unknown kappa rule '" + name + "'");
}

ConvergenceSection convergence_from_config(const json& j, const std::string& where) {
  ConvergenceSection out;
  const std::string mode = get_string(j, "mode", where);
  const json& nv = require_key(j, "N_values", where);
  if (!nv.is_array() || nv.empty()) fail(where + ".N_values", "expected a non-empty array");
  for (std::size_t i = 0; i < nv.size(); ++i)
    out.N_values.push_back(
        static_cast<int>(get_int(nv[i], where + ".N_values[" + std::to_string(i) + "]")));
  out.paths = static_cast<int>(get_int_or(j, "paths", 0, where));
  if (out.paths < 0) fail(where + ".paths", "must be nonnegative");
  if (mode == "given") {
    check_keys(j, {"mode", "N_values", "paths"}, where);
    out.mode = RunMode::Given;
    return out;
  }
  if (mode != "sampled") fail(where + ".mode", "expected 'given' or 'sampled'");
  check_keys(j, {"mode", "N_values", "paths", "replications", "kind", "delta", "kappa",
                 "lipschitz"},
             where);
  out.mode = RunMode::Sampled;
  out.replications = static_cast<int>(get_int_or(j, "replications", 1, where));
  if (out.replications < 1) fail(where + ".replications", "must be positive");
  out.kind = parse_sample_kind(get_string(j, "kind", where));
  out.delta = get_double_or(j, "delta", 0.05, where);
  if (j.contains("kappa"))
    out.kappa_rule = kappa_rule_from_config(j["kappa"], where + ".kappa");
  else
    out.kappa_rule = [](int) { return 1.0; };
  std::tie(out.L0, out.K0) =
      lipschitz_from_config(require_key(j, "lipschitz", where), where + ".lipschitz");
  return out;
}

// --- graph.json -------------------------------------------------------------

json graph_document_impl(const SampledGraph& g, const SamplingBounds* bounds, double delta) {
  json doc;
  doc["schema_version"] = 1;
  doc["N"] = g.N;
  doc["kind"] = to_string(g.kind);
  doc["kappa"] = g.kappa;
  doc["seed"] = g.seed;
  json lat = json::array();
  for (int i = 0; i < g.latents.size(); ++i) lat.push_back(g.latents(i));
  doc["latents"] = lat;
  doc["matrix"] = json_from_matrix(g.matrix);
  if (bounds) {
    doc["bounds"] = {{"d_N", bounds->d_N},
                     {"rho", bounds->rho},
                     {"rho_prime", bounds->rho_prime},
                     {"delta", delta}};
  }
  return doc;
}

}  // namespace

// --- Registries --------------------------------------------------------------

KernelGrid kernel_from_config(const nlohmann::json& spec, const TimeGrid& grid,
                              const std::string& where) {
  if (!spec.is_object()) fail(where, "expected an object");
  if (spec.contains("values")) {
    check_keys(spec, {"values"}, where);
    const Eigen::MatrixXd v =
        matrix_from_json(spec["values"], grid.n_t, grid.n_t, where + ".values");
    KernelGrid k = zero_kernel(grid, 1);
    for (int j = 0; j < grid.n_t; ++j)
      for (int c = 0; c < grid.n_t; ++c) {
        if (c >= j && v(j, c) != 0.0)
          fail(where + ".values", "entry (" + std::to_string(j) + "," + std::to_string(c) +
                                      ") must be 0: kernels act on the strict past");
        k.at(j, c)(0, 0) = v(j, c);
      }
    return k;
  }
  const std::string name = get_string(spec, "name", where);
  if (name == "zero") {
    check_keys(spec, {"name"}, where);
    return zero_kernel(grid, 1);
  }
  if (name == "constant") {
    check_keys(spec, {"name", "value"}, where);
    const double v = get_double(spec, "value", where);
    return scalar_kernel_from_fn(grid, [v](double, double) { return v; });
  }
  if (name == "exp_decay") {
    check_keys(spec, {"name", "scale", "rate"}, where);
    const double s = get_double(spec, "scale", where);
    const double r = get_double(spec, "rate", where);
    return scalar_kernel_from_fn(grid,
                                 [s, r](double t, double u) { return s * std::exp(-r * (t - u)); });
  }
  if (name == "delay") {
    check_keys(spec, {"name", "scale", "lag"}, where);
    const double s = get_double(spec, "scale", where);
    const double lag = get_double(spec, "lag", where);
    if (lag < 0) fail(where + ".lag", "must be nonnegative");
    return scalar_kernel_from_fn(
        grid, [s, lag](double t, double u) { return t - u >= lag ? s : 0.0; });
  }
  if (name == "power") {
    check_keys(spec, {"name", "scale", "exponent"}, where);
    const double s = get_double(spec, "scale", where);
    const double p = get_double(spec, "exponent", where);
    if (p < 0) fail(where + ".exponent", "must be nonnegative");
    return scalar_kernel_from_fn(grid,
                                 [s, p](double t, double u) { return s * std::pow(t - u, p); });
  }
  fail(where + ".name", "unknown kernel '" + name + "'");
}

Eigen::MatrixXd profile_from_config(const nlohmann::json& spec, int dim, const TimeGrid& grid,
                                    const std::string& where) {
  if (!spec.is_object()) fail(where, "expected an object");
  if (spec.contains("values")) {
    check_keys(spec, {"values"}, where);
    return matrix_from_json(spec["values"], dim, grid.n_t, where + ".values");
  }
  const std::string name = get_string(spec, "name", where);
  if (name == "zero") {
    check_keys(spec, {"name"}, where);
    return Eigen::MatrixXd::Zero(dim, grid.n_t);
  }
  if (name == "constant") {
    check_keys(spec, {"name", "value"}, where);
    return Eigen::MatrixXd::Constant(dim, grid.n_t, get_double(spec, "value", where));
  }
  if (name == "affine_label") {
    check_keys(spec, {"name", "base", "label_slope", "time_slope"}, where);
    const double a = get_double_or(spec, "base", 0.0, where);
    const double b = get_double_or(spec, "label_slope", 0.0, where);
    const double c = get_double_or(spec, "time_slope", 0.0, where);
    Eigen::MatrixXd m(dim, grid.n_t);
    for (int i = 0; i < dim; ++i) {
      const double label = (i + 0.5) / dim;
      for (int t = 0; t < grid.n_t; ++t) m(i, t) = a + b * label + c * grid.t[t];
    }
    return m;
  }
  fail(where + ".name", "unknown profile '" + name + "'");
}

NoiseModel noise_from_config(const nlohmann::json& spec, int dim, const TimeGrid& grid,
                             const std::string& where) {
  check_keys(spec, {"drift", "groups"}, where);
  NoiseModel model;
  model.grid = grid;
  model.dim = dim;
  model.drift = spec.contains("drift")
                    ? profile_from_config(spec["drift"], dim, grid, where + ".drift")
                    : Eigen::MatrixXd::Zero(dim, grid.n_t);
  if (spec.contains("groups")) {
    const json& groups = spec["groups"];
    if (!groups.is_array()) fail(where + ".groups", "expected an array");
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const std::string gw = where + ".groups[" + std::to_string(g) + "]";
      const json& jg = groups[g];
      check_keys(jg, {"kind", "scope", "tag", "loading"}, gw);
      const std::string kind = get_string(jg, "kind", gw);
      StreamGroup base;
      if (kind == "brownian")
        base.kind = StreamKind::Brownian;
      else if (kind == "constant_random")
        base.kind = StreamKind::ConstantRandom;
      else
        fail(gw + ".kind", "expected 'brownian' or 'constant_random'");
      base.dim = 1;
      if (jg.contains("tag")) {
        if (!jg["tag"].is_string()) fail(gw + ".tag", "expected a string");
        base.tag = jg["tag"].get<std::string>();
      }
      std::string scope = "common";
      if (jg.contains("scope")) scope = get_string(jg, "scope", gw);
      const Eigen::MatrixXd loading =
          profile_from_config(require_key(jg, "loading", gw), dim, grid, gw + ".loading");
      if (scope == "common") {
        base.common = true;
        model.groups.push_back(base);
        model.loadings.push_back(loading);
      } else if (scope == "per_coordinate") {
        base.common = false;
        for (int i = 0; i < dim; ++i) {
          model.groups.push_back(base);
          Eigen::MatrixXd l = Eigen::MatrixXd::Zero(dim, grid.n_t);
          l.row(i) = loading.row(i);
          model.loadings.push_back(l);
        }
      } else {
        fail(gw + ".scope", "expected 'common' or 'per_coordinate'");
      }
    }
  }
  model.validate();
  return model;
}

GraphonFn graphon_from_config(const nlohmann::json& spec, int n_u, GraphonGrid& grid_out,
                              const std::string& where) {
  if (!spec.is_object()) fail(where, "expected an object");
  if (spec.contains("values")) {
    check_keys(spec, {"values"}, where);
    const Eigen::MatrixXd v = matrix_from_json(spec["values"], n_u, n_u, where + ".values");
    grid_out.n_u = n_u;
    grid_out.values = v;
    grid_out.validate();
    const int n = n_u;
    Eigen::MatrixXd vals = v;
    return [vals, n](double u, double x) {
      const auto idx = [n](double y) { return std::min(static_cast<int>(y * n), n - 1); };
      return vals(idx(u), idx(x));
    };
  }
  const std::string name = get_string(spec, "name", where);
  GraphonFn fn;
  if (name == "constant") {
    check_keys(spec, {"name", "value"}, where);
    const double v = get_double(spec, "value", where);
    if (v < 0.0 || v > 1.0) fail(where + ".value", "must lie in [0, 1]");
    fn = [v](double, double) { return v; };
  } else if (name == "affine_product") {
    check_keys(spec, {"name", "offset", "scale"}, where);
    const double o = get_double_or(spec, "offset", 0.0, where);
    const double s = get_double_or(spec, "scale", 1.0, where);
    if (o < 0.0 || o > 1.0 || o + s < 0.0 || o + s > 1.0)
      fail(where, "offset + scale*uv must stay in [0, 1]");
    fn = [o, s](double u, double v) { return o + s * u * v; };
  } else if (name == "two_block") {
    check_keys(spec, {"name", "inside", "outside", "cut"}, where);
    const double a = get_double(spec, "inside", where);
    const double b = get_double(spec, "outside", where);
    const double cut = get_double_or(spec, "cut", 0.5, where);
    if (a < 0.0 || a > 1.0 || b < 0.0 || b > 1.0) fail(where, "block values must lie in [0, 1]");
    if (!(cut > 0.0 && cut < 1.0)) fail(where + ".cut", "must lie in (0, 1)");
    fn = [a, b, cut](double u, double v) { return (u < cut) == (v < cut) ? a : b; };
  } else {
    fail(where + ".name", "unknown graphon '" + name + "'");
  }
  grid_out = graphon_from_fn(n_u, fn);
  return fn;
}

namespace {

Eigen::MatrixXd weights_from_config(const json& j, int N, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
  if (j.contains("matrix")) {
    check_keys(j, {"matrix"}, where);
    return matrix_from_json(j["matrix"], N, N, where + ".matrix");
  }
  if (j.contains("graph_file")) {
    check_keys(j, {"graph_file"}, where);
    const std::string path = get_string(j, "graph_file", where);
    const SampledGraph g = graph_from_document(json::parse(read_text_file(path), nullptr, false),
                                               where + ".graph_file(" + path + ")");
    if (g.N != N)
      fail(where + ".graph_file", "graph has " + std::to_string(g.N) + " nodes, game expects " +
                                      std::to_string(N));
    return game_weights(g);
  }
  const std::string name = get_string(j, "name", where);
  if (name == "complete") {
    check_keys(j, {"name"}, where);
    return Eigen::MatrixXd::Ones(N, N) - Eigen::MatrixXd::Identity(N, N);
  }
  fail(where + ".name", "unknown weights '" + name + "'");
}

}  // namespace

// --- Example families ---------------------------------------------------------

FamilyGame family_from_config(const std::string& family, const nlohmann::json& params,
                              const TimeGrid& grid) {
  const std::string where = "game.params";
  if (!params.is_object()) fail(where, "expected an object");
  FamilyGame out;
  out.name = family;
  json resolved = params;

  const int N = static_cast<int>(get_int(params, "N", where));
  if (N < 1) fail(where + ".N", "must be a positive integer");

  if (family == "systemic") {
    check_keys(params,
               {"N", "tau", "nu", "w", "kappa", "epsilon", "c", "xi", "h", "sigma",
                "common_sigma"},
               where);
    SystemicRiskInput in;
    in.grid = grid;
    in.N = N;
    if (params.contains("tau")) {
      if (params.contains("nu")) fail(where, "give either 'tau' or 'nu', not both");
      const double tau = get_double(params, "tau", where);
      if (!(tau > 0.0)) fail(where + ".tau", "must be positive");
      in.nu = {{0.0, 1.0}, {tau, -1.0}};
      resolved.erase("tau");
      resolved["nu"] = json::array({json::array({0.0, 1.0}), json::array({tau, -1.0})});
    } else if (params.contains("nu")) {
      const json& nu = params["nu"];
      if (!nu.is_array() || nu.empty()) fail(where + ".nu", "expected a non-empty array");
      for (std::size_t i = 0; i < nu.size(); ++i) {
        const std::string aw = where + ".nu[" + std::to_string(i) + "]";
        if (!nu[i].is_array() || nu[i].size() != 2) fail(aw, "expected [time, weight]");
        in.nu.emplace_back(get_double(nu[i][0], aw), get_double(nu[i][1], aw));
      }
    } else {
      in.nu = {{0.0, 1.0}};
      resolved["nu"] = json::array({json::array({0.0, 1.0})});
    }
    if (params.contains("w") && params["w"].is_array()) {
      in.w_sys = matrix_from_json(params["w"], N, N, where + ".w");
    } else {
      if (params.contains("w")) check_keys(params["w"], {"name"}, where + ".w");
      if (params.contains("w") && get_string(params["w"], "name", where + ".w") !=
                                      "uniform_offdiag")
        fail(where + ".w.name", "unknown weights");
      in.w_sys = N > 1 ? ((Eigen::MatrixXd::Ones(N, N) - Eigen::MatrixXd::Identity(N, N)) /
                          (N - 1.0))
                             .eval()
                       : Eigen::MatrixXd::Zero(1, 1);
      resolved["w"] = {{"name", "uniform_offdiag"}};
    }
    in.kappa = vector_from_json(require_key(params, "kappa", where), N, where + ".kappa");
    in.epsilon = vector_from_json(require_key(params, "epsilon", where), N, where + ".epsilon");
    in.c = vector_from_json(require_key(params, "c", where), N, where + ".c");
    in.xi = params.contains("xi") ? vector_from_json(params["xi"], N, where + ".xi")
                                  : Eigen::VectorXd::Zero(N);
    if (!params.contains("xi")) resolved["xi"] = 0.0;
    in.h = params.contains("h") ? profile_from_config(params["h"], N, grid, where + ".h")
                                : Eigen::MatrixXd::Zero(N, grid.n_t);
    if (!params.contains("h")) resolved["h"] = {{"name", "zero"}};
    const double sigma = get_double_or(params, "sigma", 1.0, where);
    const double common_sigma = get_double_or(params, "common_sigma", 0.0, where);
    if (sigma < 0 || common_sigma < 0) fail(where, "volatilities must be nonnegative");
    resolved["sigma"] = sigma;
    resolved["common_sigma"] = common_sigma;
    json noise = json::object();
    json groups = json::array();
    if (sigma > 0)
      groups.push_back({{"kind", "brownian"},
                        {"scope", "per_coordinate"},
                        {"tag", "idiosyncratic"},
                        {"loading", {{"name", "constant"}, {"value", sigma}}}});
    if (common_sigma > 0)
      groups.push_back({{"kind", "brownian"},
                        {"scope", "common"},
                        {"tag", "common"},
                        {"loading", {{"name", "constant"}, {"value", common_sigma}}}});
    noise["groups"] = groups;
    in.V = noise_from_config(noise, N, grid, where + ".V");
    in.validate();
    out.systemic = std::move(in);
  } else if (family == "network") {
    check_keys(params, {"N", "a", "b", "c", "w", "C_f", "C_g", "xi", "sigma"}, where);
    NetworkSDEInput in;
    in.grid = grid;
    in.N = N;
    in.a = vector_from_json(require_key(params, "a", where), N, where + ".a");
    in.b = vector_from_json(require_key(params, "b", where), N, where + ".b");
    in.c = vector_from_json(require_key(params, "c", where), N, where + ".c");
    in.w_net = matrix_from_json(require_key(params, "w", where), N, N, where + ".w");
    const auto small_matrices = [&](const json& v, int d, const std::string& kw) {
      std::vector<Eigen::MatrixXd> ms;
      if (!v.is_array() || v.empty()) fail(kw, "expected a matrix or an array of matrices");
      if (v[0].is_array() && !v[0].empty() && v[0][0].is_number()) {
        ms.assign(N, matrix_from_json(v, d, d, kw));
      } else {
        if (v.size() != static_cast<std::size_t>(N))
          fail(kw, "expected " + std::to_string(N) + " matrices");
        for (std::size_t i = 0; i < v.size(); ++i)
          ms.push_back(matrix_from_json(v[i], d, d, kw + "[" + std::to_string(i) + "]"));
      }
      return ms;
    };
    for (const auto& m : small_matrices(require_key(params, "C_f", where), 3, where + ".C_f"))
      in.C_f.push_back(m);
    for (const auto& m : small_matrices(require_key(params, "C_g", where), 2, where + ".C_g"))
      in.C_g.push_back(m);
    in.xi = params.contains("xi") ? vector_from_json(params["xi"], N, where + ".xi")
                                  : Eigen::VectorXd::Zero(N);
    if (!params.contains("xi")) resolved["xi"] = 0.0;
    in.sigma = get_double_or(params, "sigma", 1.0, where);
    resolved["sigma"] = in.sigma;
    in.validate();
    out.network = std::move(in);
  } else if (family == "simple-graph") {
    check_keys(params, {"N", "edges", "a_bar", "sigma_bar", "q", "epsilon", "c", "xi"}, where);
    SimpleGraphInput in;
    in.grid = grid;
    in.N = N;
    const json& edges = require_key(params, "edges", where);
    if (!edges.is_array()) fail(where + ".edges", "expected an array of [i, j] pairs");
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const std::string ew = where + ".edges[" + std::to_string(i) + "]";
      if (!edges[i].is_array() || edges[i].size() != 2) fail(ew, "expected [i, j]");
      in.edges.emplace_back(static_cast<int>(get_int(edges[i][0], ew)),
                            static_cast<int>(get_int(edges[i][1], ew)));
    }
    in.a_bar = get_double_or(params, "a_bar", 0.0, where);
    in.sigma_bar = get_double_or(params, "sigma_bar", 1.0, where);
    in.q_sim = get_double_or(params, "q", 0.0, where);
    in.eps_sim = get_double_or(params, "epsilon", 0.0, where);
    in.c_sim = get_double_or(params, "c", 0.0, where);
    in.xi = params.contains("xi") ? vector_from_json(params["xi"], N, where + ".xi")
                                  : Eigen::VectorXd::Zero(N);
    resolved["a_bar"] = in.a_bar;
    resolved["sigma_bar"] = in.sigma_bar;
    resolved["q"] = in.q_sim;
    resolved["epsilon"] = in.eps_sim;
    resolved["c"] = in.c_sim;
    if (!params.contains("xi")) resolved["xi"] = 0.0;
    in.validate();
    out.simple_graph = std::move(in);
  } else {
    fail("game.family", "unknown family '" + family +
                            "' (expected systemic, network, or simple-graph)");
  }
  out.params = std::move(resolved);
  return out;
}

ReducedVolterraGame build_family_game(const FamilyGame& fam) {
  if (fam.systemic) return volterra_reduce(systemic_risk_build(*fam.systemic));
  if (fam.network) return volterra_reduce(network_sde_build(*fam.network));
  if (fam.simple_graph) return volterra_reduce(simple_graph_build(*fam.simple_graph));
  throw schema_error("config: game.family: no family parameters present");
}

nlohmann::json family_game_document(const FamilyGame& fam, const TimeGrid& grid) {
  nlohmann::json doc;
  doc["schema_version"] = 1;
  doc["grid"] = {{"T", grid.T}, {"n_t", grid.n_t}};
  doc["game"] = {{"family", fam.name}, {"params", fam.params}};
  return doc;
}

// --- graph.json ----------------------------------------------------------------

nlohmann::json graph_document(const SampledGraph& g) { return graph_document_impl(g, nullptr, 0); }

nlohmann::json graph_document(const SampledGraph& g, const SamplingBounds& bounds, double delta) {
  return graph_document_impl(g, &bounds, delta);
}

SampledGraph graph_from_document(const nlohmann::json& doc, const std::string& where) {
  if (doc.is_discarded() || !doc.is_object()) fail(where, "not a JSON object");
  check_keys(doc, {"schema_version", "N", "kind", "kappa", "seed", "latents", "matrix", "bounds"},
             where);
  if (get_int(doc, "schema_version", where) != 1)
    fail(where + ".schema_version", "expected 1");
  SampledGraph g;
  g.N = static_cast<int>(get_int(doc, "N", where));
  if (g.N < 1) fail(where + ".N", "must be positive");
  g.kind = parse_sample_kind(get_string(doc, "kind", where));
  g.kappa = get_double(doc, "kappa", where);
  const json& seed = require_key(doc, "seed", where);
  if (!seed.is_number_unsigned() && !seed.is_number_integer())
    fail(where + ".seed", "expected an integer");
  g.seed = seed.get<std::uint64_t>();
  const json& lat = require_key(doc, "latents", where);
  if (!lat.is_array() || lat.size() != static_cast<std::size_t>(g.N))
    fail(where + ".latents", "expected an array of length N");
  g.latents.resize(g.N);
  for (int i = 0; i < g.N; ++i)
    g.latents(i) = get_double(lat[i], where + ".latents[" + std::to_string(i) + "]");
  g.matrix = matrix_from_json(require_key(doc, "matrix", where), g.N, g.N, where + ".matrix");
  return g;
}

// --- Top level ----------------------------------------------------------------

ExperimentConfig parse_config(const nlohmann::json& doc) {
  const std::string where = "config";
  if (doc.is_discarded() || !doc.is_object()) fail(where, "not a JSON object");
  check_keys(doc,
             {"schema_version", "grid", "seed", "paths", "output", "tolerances", "game",
              "graphon", "sampling", "convergence"},
             where);
  ExperimentConfig cfg;
  cfg.raw = doc;
  if (get_int(doc, "schema_version", where) != 1)
    fail(where + ".schema_version", "expected 1");

  const json& jg = require_key(doc, "grid", where);
  check_keys(jg, {"T", "n_t", "n_u"}, where + ".grid");
  const double T = get_double(jg, "T", where + ".grid");
  const long long n_t = get_int(jg, "n_t", where + ".grid");
  if (!(T > 0)) fail(where + ".grid.T", "must be positive");
  if (n_t < 1 || n_t > 100000) fail(where + ".grid.n_t", "must be in [1, 100000]");
  cfg.grid = make_grid(T, static_cast<int>(n_t));
  const int n_u = static_cast<int>(get_int_or(jg, "n_u", -1, where + ".grid"));
  if (jg.contains("n_u") && n_u < 1) fail(where + ".grid.n_u", "must be positive");

  const json* jseed = doc.contains("seed") ? &doc["seed"] : nullptr;
  if (jseed) {
    if (!jseed->is_number_unsigned() && !(jseed->is_number_integer() &&
                                          jseed->get<long long>() >= 0))
      fail(where + ".seed", "expected a nonnegative integer");
    cfg.seed = jseed->get<std::uint64_t>();
  }
  cfg.paths = static_cast<int>(get_int_or(doc, "paths", cfg.paths, where));
  if (cfg.paths < 0) fail(where + ".paths", "must be nonnegative");
  if (doc.contains("output")) {
    if (!doc["output"].is_string()) fail(where + ".output", "expected a string");
    cfg.output = doc["output"].get<std::string>();
  }
  if (doc.contains("tolerances"))
    cfg.tolerances = tolerances_from_config(doc["tolerances"], where + ".tolerances");

  if (doc.contains("game")) cfg.game = game_from_config(doc["game"], cfg.grid, where + ".game");
  if (doc.contains("graphon"))
    cfg.graphon = graphon_from_config_section(doc["graphon"], cfg.grid, n_u, where + ".graphon");
  if (doc.contains("sampling"))
    cfg.sampling = sampling_from_config(doc["sampling"], where + ".sampling");
  if (doc.contains("convergence"))
    cfg.convergence = convergence_from_config(doc["convergence"], where + ".convergence");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  const nlohmann::json doc = nlohmann::json::parse(read_text_file(path), nullptr, false);
  if (doc.is_discarded()) throw schema_error("config: " + path + ": invalid JSON");
  return parse_config(doc);
}

std::string config_hash(const nlohmann::json& doc) {
  const std::string dump = doc.dump();
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a 64
  for (unsigned char c : dump) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

// --- Artifact text --------------------------------------------------------------

std::string profile_csv(const std::string& label_name, const Eigen::MatrixXd& m) {
  std::string out = label_name;
  for (Eigen::Index t = 0; t < m.cols(); ++t) out += ",t" + std::to_string(t);
  out += "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out += std::to_string(i);
    for (Eigen::Index t = 0; t < m.cols(); ++t) out += "," + format_double(m(i, t));
    out += "\n";
  }
  return out;
}

NumericCsv parse_numeric_csv(const std::string& text) {
  NumericCsv out;
  std::vector<std::vector<double>> rows;
  std::istringstream stream(text);
  std::string line;
  bool first = true;
  while (std::getline(stream, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (first) {
      out.header = fields;
      first = false;
      continue;
    }
    if (fields.size() != out.header.size())
      throw schema_error("csv: row has " + std::to_string(fields.size()) + " fields, header has " +
                         std::to_string(out.header.size()));
    std::vector<double> row;
    for (const auto& f : fields) {
      char* end = nullptr;
      const double v = std::strtod(f.c_str(), &end);
      if (end == f.c_str() || *end != '\0') throw schema_error("csv: non-numeric field '" + f + "'");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (first) throw schema_error("csv: missing header row");
  out.values.resize(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(out.header.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < rows[i].size(); ++k)
      out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  return out;
}

NumericCsv read_numeric_csv(const std::string& path) {
  return parse_numeric_csv(read_text_file(path));
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw schema_error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw schema_error("failed writing '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw schema_error("cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace fredholm
