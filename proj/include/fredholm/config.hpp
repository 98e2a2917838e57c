#pragma once

// Experiment configuration for the command-line tool: a strict JSON schema
// with named closed-form registries for kernels, noise, graphons, and
// example-model families (no embedded code — every run is reconstructible
// from the config document alone), plus the artifact writers/readers and the
// canonical config hash recorded in manifests.
//
// Top-level document (unknown keys are rejected at every level):
//
//   {
//     "schema_version": 1,                       // required
//     "grid": {"T": 1.0, "n_t": 32, "n_u": 64},  // required; n_u only with "graphon"
//     "seed": 1,                                 // optional, default 1
//     "paths": 256,                              // optional, default 256
//     "output": "out",                           // optional default artifact dir
//     "tolerances": {"tol": 1e-8, "energy_tol": 1e-6,
//                    "max_rank": -1, "coercivity_tol": 1e-10},   // optional
//     "game": {...}, "graphon": {...}, "sampling": {...}, "convergence": {...}
//   }
//
// "game" — finite-player game, one of two forms:
//   graph form: {"players": N, "lambda": l > 0,
//                "self_kernel": <kernel>, "cross_kernel": <kernel>,
//                "weights": <weights>, "noise": <noise>}
//   family form: {"family": "systemic"|"network"|"simple-graph",
//                 "params": {...}}   // see family schemas below
//
// <kernel> — scalar two-time Volterra kernel K(t,s), s < t:
//   {"name": "zero"}
//   {"name": "constant",  "value": v}            // v
//   {"name": "exp_decay", "scale": s, "rate": r} // s exp(-r (t-s))
//   {"name": "delay",     "scale": s, "lag": d}  // s 1{t-s >= d}
//   {"name": "power",     "scale": s, "exponent": p >= 0}  // s (t-s)^p
//   {"values": [[n_t x n_t]]}                    // inline grid; entries with
//                                                // column >= row must be 0
//
// <profile> — dim x n_t coefficient matrix:
//   {"name": "zero"} | {"name": "constant", "value": v}
//   {"name": "affine_label", "base": a, "label_slope": b, "time_slope": c}
//       // a + b (i + 1/2)/dim + c t  for coordinate i
//   {"values": [[dim x n_t]]}
//
// <noise> — martingale-affine model on the grid:
//   {"drift": <profile>,                         // optional, default zero
//    "groups": [{"kind": "brownian"|"constant_random",
//                "scope": "common"|"per_coordinate",
//                "tag": "...",                   // optional label
//                "loading": <profile>} ...]}     // optional, default none
//   A "common" group is one scalar driver loaded by the full profile matrix;
//   "per_coordinate" expands to dim scalar drivers where driver i loads only
//   coordinate i with row i of the profile.
//
// <weights> — N x N interaction weights (symmetric, zero diagonal):
//   {"matrix": [[...]]} | {"name": "complete"}   // all-ones off the diagonal
//   {"graph_file": "graph.json"}                 // output of the sample
//                                                // command; applies the
//                                                // 1/kappa game rescaling
//
// "graphon" — continuum game on labels u in [0,1], discretized at n_u
// midpoints:
//   {"lambda": l > 0, "self_kernel": <kernel>, "cross_kernel": <kernel>,
//    "graphon": <graphon>, "noise": <noise with dim n_u>}
// <graphon>:
//   {"name": "constant", "value": c}
//   {"name": "affine_product", "offset": o, "scale": s}   // o + s u v
//   {"name": "two_block", "inside": a, "outside": b, "cut": x}
//   {"values": [[n_u x n_u]]}                    // symmetric step graphon
//
// "sampling": {"nodes": N, "kind": "S1"|"S2"|"S3"|"S4",
//              "kappa": k in (0,1],              // optional, default 1
//              "delta": d,                       // optional, default 0.05
//              "lipschitz": {"L0": ..., "K0": ...}}  // optional: emit bounds
//
// "convergence":
//   given mode:   {"mode": "given", "N_values": [...], "paths": p}
//   sampled mode: {"mode": "sampled", "N_values": [...], "paths": p,
//                  "replications": r, "kind": "S1".."S4", "delta": d,
//                  "kappa": {"name": "constant", "value": v}
//                         | {"name": "log_sq_over_n"},   // (log N)^2 / N
//                  "lipschitz": {"L0": ..., "K0": ...}}  // required
//
// Family parameter schemas ("params"); scalars may be given where arrays are
// expected and are broadcast to length N:
//   systemic (inter-bank lending with delayed repayment):
//     {"N": n, "tau": t | "nu": [[time, weight], ...],   // default nu: lend
//                                                        // at 0, repay at tau
//      "w": [[N x N]] | {"name": "uniform_offdiag"},     // default uniform
//      "kappa": ..., "epsilon": ..., "c": ..., "xi": ...,
//      "h": <profile dim N>,                             // optional, zero
//      "sigma": s, "common_sigma": cs}                   // per-bank and
//                                                        // common Brownian
//                                                        // vols; defaults 1, 0
//   network (interacting diffusions on a weighted graph):
//     {"N": n, "a": ..., "b": ..., "c": ..., "w": [[N x N]],
//      "C_f": [[3x3]] | [N of [[3x3]]], "C_g": [[2x2]] | [N of [[2x2]]],
//      "xi": ..., "sigma": s}
//   simple-graph (flocking on an undirected simple graph):
//     {"N": n, "edges": [[i, j], ...], "a_bar": ..., "sigma_bar": ...,
//      "q": ..., "epsilon": ..., "c": ..., "xi": ...}

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fredholm/convergence.hpp"
#include "fredholm/examples.hpp"
#include "fredholm/finite_game.hpp"
#include "fredholm/graphon.hpp"
#include "fredholm/kernel.hpp"
#include "fredholm/noise.hpp"
#include "fredholm/sampling.hpp"

namespace fredholm {

struct Tolerances {
  double tol = 1e-8;
  double energy_tol = 1e-6;
  int max_rank = -1;
  double coercivity_tol = 1e-10;
};

struct FamilyGame {
  std::string name;        // "systemic" | "network" | "simple-graph"
  nlohmann::json params;   // resolved parameter record (defaults materialized)
  std::optional<SystemicRiskInput> systemic;
  std::optional<NetworkSDEInput> network;
  std::optional<SimpleGraphInput> simple_graph;
};

struct GameSection {
  std::optional<FiniteGameSpec> graph_form;
  std::optional<FamilyGame> family;
};

struct GraphonSection {
  GraphonGameSpec spec;
  GraphonFn fn;  // non-null for closed-form graphons; inline grids wrap to a
                 // step-function lookup
};

struct SamplingSection {
  int nodes = 0;
  SampleKind kind = SampleKind::S1;
  double kappa = 1.0;
  double delta = 0.05;
  bool has_lipschitz = false;
  double L0 = 0.0, K0 = 0.0;
};

struct ConvergenceSection {
  RunMode mode = RunMode::Given;
  std::vector<int> N_values;
  int paths = 0;  // 0 -> top-level default
  int replications = 1;
  SampleKind kind = SampleKind::S1;
  double delta = 0.05;
  std::function<double(int)> kappa_rule;
  double L0 = 0.0, K0 = 0.0;
};

struct ExperimentConfig {
  int schema_version = 1;
  TimeGrid grid;
  std::uint64_t seed = 1;
  int paths = 256;
  std::string output = "out";
  Tolerances tolerances;
  std::optional<GameSection> game;
  std::optional<GraphonSection> graphon;
  std::optional<SamplingSection> sampling;
  std::optional<ConvergenceSection> convergence;
  nlohmann::json raw;  // the parsed document (hash input)
};

// Parses and validates a config document / file.  All violations throw
// schema_error with a key path in the message.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::string& path);

// FNV-1a 64-bit hash of the canonical (sorted-key) dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& doc);

// Registry constructors, exposed for direct use in tests.
KernelGrid kernel_from_config(const nlohmann::json& spec, const TimeGrid& grid,
                              const std::string& where);
Eigen::MatrixXd profile_from_config(const nlohmann::json& spec, int dim, const TimeGrid& grid,
                                    const std::string& where);
NoiseModel noise_from_config(const nlohmann::json& spec, int dim, const TimeGrid& grid,
                             const std::string& where);
// Closed-form graphons return a callable and fill `grid_out` with its midpoint
// discretization; inline grids return a step-function wrapper of the matrix.
GraphonFn graphon_from_config(const nlohmann::json& spec, int n_u, GraphonGrid& grid_out,
                              const std::string& where);

// Family parsing, the solver-ready reduction, and the self-contained config
// document written as game.json by the example command.
FamilyGame family_from_config(const std::string& family, const nlohmann::json& params,
                              const TimeGrid& grid);
ReducedVolterraGame build_family_game(const FamilyGame& fam);
nlohmann::json family_game_document(const FamilyGame& fam, const TimeGrid& grid);

// graph.json: the record of one sampled graph (sample command output, and the
// "graph_file" weights source for finite games).
nlohmann::json graph_document(const SampledGraph& g);
nlohmann::json graph_document(const SampledGraph& g, const SamplingBounds& bounds, double delta);
SampledGraph graph_from_document(const nlohmann::json& doc, const std::string& where = "graph");

// --- Artifact text ----------------------------------------------------------

// Wide CSV for a labelled matrix: header `<label_name>,t0,...,t{n_t-1}`, one
// row per matrix row, doubles printed with %.17g (exact round-trip).
std::string profile_csv(const std::string& label_name, const Eigen::MatrixXd& m);

// Generic reader for every CSV this tool writes: a header line of column
// names followed by purely numeric rows.
struct NumericCsv {
  std::vector<std::string> header;
  Eigen::MatrixXd values;
};
NumericCsv parse_numeric_csv(const std::string& text);  // throws schema_error
NumericCsv read_numeric_csv(const std::string& path);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);  // throws schema_error

}  // namespace fredholm
