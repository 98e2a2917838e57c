// fredholm-games: configuration-driven front end for the game solvers.
//
// Subcommands: validate, solve-finite, solve-graphon, sample, converge,
// example.  Every run is described by a JSON config (see
// fredholm/config.hpp for the schema); artifacts land in --out together with
// a manifest.json recording the config hash, effective seeds, versions, and
// wall time.  All computational artifacts (CSV/JSON except the manifest's
// wall-time field) are byte-identical across reruns and across --threads.
//
// Exit codes: 0 ok, 2 config/schema problem, 3 violated model assumption,
// 4 solver self-check failure, 5 numerical breakdown.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <json.hpp>

#include "fredholm/config.hpp"
#include "fredholm/convergence.hpp"
#include "fredholm/errors.hpp"
#include "fredholm/examples.hpp"
#include "fredholm/finite_game.hpp"
#include "fredholm/graphon.hpp"
#include "fredholm/kernel.hpp"
#include "fredholm/noise.hpp"
#include "fredholm/sampling.hpp"

namespace {

using fredholm::ExperimentConfig;
using nlohmann::json;

struct CommonFlags {
  std::string config_path;
  std::string out;  // empty -> config "output" (directory commands)
  std::optional<std::uint64_t> seed;
  std::optional<int> paths;
  std::optional<double> tol;
  int threads = 0;
};

// Effective run parameters: config defaults overridden by flags.
struct RunParams {
  std::uint64_t seed = 1;
  int paths = 256;
  int threads = 0;
  fredholm::Tolerances tolerances;
  std::string out;
};

RunParams resolve_params(const ExperimentConfig& cfg, const CommonFlags& flags) {
  RunParams p;
  p.seed = flags.seed ? *flags.seed : cfg.seed;
  p.paths = flags.paths ? *flags.paths : cfg.paths;
  p.threads = flags.threads;
  p.tolerances = cfg.tolerances;
  if (flags.tol) {
    if (*flags.tol <= 0) throw fredholm::schema_error("--tol must be positive");
    p.tolerances.tol = *flags.tol;
  }
  p.out = flags.out.empty() ? cfg.output : flags.out;
  return p;
}

std::string json_text(const json& doc) { return doc.dump(2) + "\n"; }

class ArtifactWriter {
 public:
  ArtifactWriter(std::string dir, std::string command, const ExperimentConfig& cfg,
                 const RunParams& params)
      : dir_(std::move(dir)),
        command_(std::move(command)),
        hash_(fredholm::config_hash(cfg.raw)),
        params_(params),
        start_(std::chrono::steady_clock::now()) {
    std::filesystem::create_directories(dir_);
  }

  void write(const std::string& name, const std::string& text) {
    fredholm::write_text_file((std::filesystem::path(dir_) / name).string(), text);
    names_.push_back(name);
  }

  // The manifest is the run record: unlike every other artifact its
  // wall_seconds field varies between reruns by design.
  void finish() {
    json man;
    man["schema_version"] = 1;
    man["command"] = command_;
    man["config_hash"] = hash_;
    man["seed"] = params_.seed;
    man["paths"] = params_.paths;
    man["threads"] = params_.threads;
    man["tolerances"] = {{"tol", params_.tolerances.tol},
                         {"energy_tol", params_.tolerances.energy_tol},
                         {"max_rank", params_.tolerances.max_rank},
                         {"coercivity_tol", params_.tolerances.coercivity_tol}};
    man["versions"] = {{"tool", FREDHOLM_GAMES_VERSION},
                       {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                     std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                     std::to_string(EIGEN_MINOR_VERSION)},
                       {"compiler", __VERSION__}};
    man["artifacts"] = names_;
    man["wall_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    fredholm::write_text_file((std::filesystem::path(dir_) / "manifest.json").string(),
                              json_text(man));
    std::printf("wrote %zu artifact(s) + manifest.json to %s\n", names_.size(), dir_.c_str());
  }

 private:
  std::string dir_;
  std::string command_;
  std::string hash_;
  RunParams params_;
  std::vector<std::string> names_;
  std::chrono::steady_clock::time_point start_;
};

fredholm::CoercivityReport finite_coercivity(const fredholm::FiniteGameSpec& spec, double tol) {
  fredholm::OperatorMatrix sym;
  sym.grid = spec.grid;
  sym.n = spec.N;
  sym.is_volterra = false;
  sym.m = fredholm::kernel_to_operator(spec.B).m +
          fredholm::kernel_to_operator(spec.Bbar).m.transpose();
  return fredholm::coercivity_check(sym, spec.lambda, tol);
}

json coercivity_json(const fredholm::CoercivityReport& rep) {
  return {{"c0", rep.c0_estimate},
          {"passed", rep.passed},
          {"borderline", rep.borderline},
          {"note", rep.note}};
}

fredholm::FiniteGameSpec finite_spec_of(const ExperimentConfig& cfg) {
  if (!cfg.game) throw fredholm::schema_error("config: this command needs a 'game' section");
  if (cfg.game->graph_form) return *cfg.game->graph_form;
  return fredholm::build_family_game(*cfg.game->family).spec;
}

std::string format_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// --- validate ----------------------------------------------------------------

int cmd_validate(const CommonFlags& flags) {
  const ExperimentConfig cfg = fredholm::load_config(flags.config_path);
  const RunParams params = resolve_params(cfg, flags);
  const double ctol = params.tolerances.coercivity_tol;

  json report;
  report["schema"] = "ok";
  report["config_hash"] = fredholm::config_hash(cfg.raw);
  std::vector<std::string> failures;

  if (cfg.game) {
    if (cfg.game->family) {
      const fredholm::FamilyGame& fam = *cfg.game->family;
      json fama;
      fama["name"] = fam.name;
      if (fam.systemic) {
        const auto rep = fredholm::systemic_assumption_check(*fam.systemic);
        fama["passed"] = rep.passed;
        fama["eps_psd"] = rep.eps_psd;
        fama["c_psd"] = rep.c_psd;
        fama["kappa_ok"] = rep.kappa_ok;
        fama["delay_branch"] = rep.delay_branch;
        fama["critical_T"] = rep.critical_T;
        fama["kappa_lhs"] = rep.kappa_lhs;
        if (!rep.passed) {
          std::string why = "systemic sufficient conditions fail:";
          if (!rep.eps_psd) why += " running-penalty form not nonnegative;";
          if (!rep.c_psd) why += " terminal-penalty form not nonnegative;";
          if (!rep.kappa_ok && rep.delay_branch)
            why += " horizon T = " + format_g(fam.systemic->grid.T) +
                   " exceeds the critical horizon T* = " + format_g(rep.critical_T) + ";";
          if (!rep.kappa_ok && !rep.delay_branch) why += " incentive matrix not nonnegative;";
          failures.push_back(why);
        }
      }
      const auto reduced = fredholm::build_family_game(fam);
      const auto rep = finite_coercivity(reduced.spec, ctol);
      fama["reduced"] = coercivity_json(rep);
      if (!rep.passed)
        failures.push_back("reduced family game fails coercivity (c0 = " +
                           format_g(rep.c0_estimate) + ")");
      report["family"] = fama;
    } else {
      const auto rep = finite_coercivity(*cfg.game->graph_form, ctol);
      report["game"] = coercivity_json(rep);
      if (!rep.passed)
        failures.push_back("finite game fails coercivity (c0 = " + format_g(rep.c0_estimate) +
                           ")");
    }
  }

  if (cfg.graphon) {
    const auto modes = fredholm::spectral_decompose(cfg.graphon->spec.graphon,
                                                    params.tolerances.energy_tol,
                                                    params.tolerances.max_rank);
    const auto rep = fredholm::coercivity_check_graphon(cfg.graphon->spec, modes, ctol);
    report["graphon"] = {{"c_w", rep.c_w},         {"c_w_raw", rep.c_w_raw},
                         {"clamped", rep.clamped}, {"passed", rep.passed},
                         {"a_psd", rep.a_psd},     {"note", rep.note}};
    if (!rep.passed)
      failures.push_back("graphon game fails coercivity (c_W = " + format_g(rep.c_w_raw) + ")");
  }

  if (cfg.sampling && cfg.sampling->has_lipschitz) {
    const auto b = fredholm::sampling_error_bounds(cfg.sampling->nodes, cfg.sampling->L0,
                                                   cfg.sampling->K0, cfg.sampling->delta,
                                                   cfg.sampling->kappa, cfg.sampling->kind);
    report["sampling"] = {{"d_N", b.d_N}, {"rho", b.rho}, {"rho_prime", b.rho_prime}};
  }

  report["assumptions_passed"] = failures.empty();
  std::printf("%s", json_text(report).c_str());
  if (!failures.empty()) {
    std::string msg = "validate:";
    for (const auto& f : failures) msg += " " + f;
    throw fredholm::assumption_error(msg);
  }
  return 0;
}

// --- solve-finite -------------------------------------------------------------

int cmd_solve_finite(const CommonFlags& flags) {
  const ExperimentConfig cfg = fredholm::load_config(flags.config_path);
  const RunParams params = resolve_params(cfg, flags);
  const fredholm::FiniteGameSpec spec = finite_spec_of(cfg);
  ArtifactWriter art(params.out, "solve-finite", cfg, params);

  const fredholm::EquilibriumOperator op(spec, params.tolerances.coercivity_tol);
  const Eigen::MatrixXd zero_drivers =
      Eigen::MatrixXd::Zero(spec.noise.total_streams(), spec.grid.n_t);
  const Eigen::MatrixXd alpha0 = op.solve_path(zero_drivers);
  const double det_residual = op.foc_residual(zero_drivers, alpha0);

  json diag;
  diag["coercivity"] = coercivity_json(op.coercivity());
  diag["players"] = spec.N;
  diag["deterministic_path"] = {{"foc_residual", det_residual}};
  if (params.paths > 0) {
    const auto ensemble =
        fredholm::simulate(spec.noise, params.paths, params.seed, params.threads);
    const auto res =
        fredholm::solve_equilibrium(op, ensemble, params.tolerances.tol, params.threads);
    diag["ensemble"] = {{"paths", params.paths},
                        {"max_foc_residual", res.diag.max_foc_residual},
                        {"mean_foc_residual", res.diag.mean_foc_residual},
                        {"residual_scale", res.diag.residual_scale},
                        {"tol", res.diag.tol},
                        {"lu_forward_max_diff", res.diag.lu_forward_max_diff}};
  }

  art.write("equilibrium.csv", fredholm::profile_csv("player", alpha0));
  art.write("diagnostics.json", json_text(diag));
  art.finish();
  return 0;
}

// --- solve-graphon --------------------------------------------------------------

int cmd_solve_graphon(const CommonFlags& flags) {
  const ExperimentConfig cfg = fredholm::load_config(flags.config_path);
  const RunParams params = resolve_params(cfg, flags);
  if (!cfg.graphon) throw fredholm::schema_error("config: solve-graphon needs a 'graphon' section");
  const fredholm::GraphonGameSpec& spec = cfg.graphon->spec;
  ArtifactWriter art(params.out, "solve-graphon", cfg, params);

  const fredholm::GraphonSolver solver(spec, params.tolerances.energy_tol,
                                       params.tolerances.max_rank,
                                       params.tolerances.coercivity_tol);
  const auto& modes = solver.modes();
  std::string modes_csv = "mode,theta";
  for (int u = 0; u < modes.n_u; ++u) modes_csv += ",u" + std::to_string(u);
  modes_csv += "\n";
  for (int i = 0; i < modes.rank; ++i) {
    modes_csv += std::to_string(i) + "," + format_g(modes.theta(i));
    for (int u = 0; u < modes.n_u; ++u) modes_csv += "," + format_g(modes.phi(u, i));
    modes_csv += "\n";
  }

  const Eigen::MatrixXd zero_drivers =
      Eigen::MatrixXd::Zero(spec.noise.total_streams(), spec.grid.n_t);
  const Eigen::MatrixXd field0 = solver.field(zero_drivers);

  json diag;
  const auto& crep = solver.coercivity();
  diag["coercivity"] = {{"c_w", crep.c_w},         {"c_w_raw", crep.c_w_raw},
                        {"clamped", crep.clamped}, {"passed", crep.passed},
                        {"a_psd", crep.a_psd},     {"note", crep.note}};
  diag["rank"] = modes.rank;
  diag["labels"] = modes.n_u;
  diag["energy_total"] = modes.energy_total;
  diag["truncation_energy"] = modes.truncation_energy;
  diag["admissibility_constant"] = solver.admissibility_constant();
  diag["deterministic_path"] = {
      {"foc_residual", solver.foc_residual(zero_drivers, field0)}};
  if (params.paths > 0) {
    const auto ensemble =
        fredholm::simulate(spec.noise, params.paths, params.seed, params.threads);
    double worst = 0.0, mean = 0.0, scale = 1.0;
    for (const auto& path : ensemble) {
      const double r = solver.foc_residual(path.drivers, solver.field(path.drivers));
      worst = std::max(worst, r);
      mean += r;
      if (path.realized.size()) scale = std::max(scale, 1.0 + path.realized.cwiseAbs().maxCoeff());
    }
    mean /= static_cast<double>(ensemble.size());
    diag["ensemble"] = {{"paths", params.paths},
                        {"max_foc_residual", worst},
                        {"mean_foc_residual", mean},
                        {"residual_scale", scale},
                        {"tol", params.tolerances.tol}};
    // At full rank the equilibrium condition must hold to solver precision;
    // truncated solves report the defect alongside the truncation budget.
    if (modes.rank == modes.n_u && worst > params.tolerances.tol * scale)
      throw fredholm::solver_error("solve-graphon: full-rank equilibrium defect " +
                                   format_g(worst) + " exceeds " +
                                   format_g(params.tolerances.tol * scale));
  }

  art.write("modes.csv", modes_csv);
  art.write("field.csv", fredholm::profile_csv("label", field0));
  art.write("diagnostics.json", json_text(diag));
  art.finish();
  return 0;
}

// --- sample ----------------------------------------------------------------------

int cmd_sample(const CommonFlags& flags) {
  const ExperimentConfig cfg = fredholm::load_config(flags.config_path);
  const RunParams params = resolve_params(cfg, flags);
  if (!cfg.graphon || !cfg.sampling)
    throw fredholm::schema_error("config: sample needs 'graphon' and 'sampling' sections");
  const fredholm::SamplingSection& s = *cfg.sampling;
  ArtifactWriter art(params.out, "sample", cfg, params);

  const fredholm::SampledGraph g =
      fredholm::sample_graph(cfg.graphon->fn, s.nodes, s.kind, s.kappa, params.seed);
  json doc;
  if (s.has_lipschitz) {
    const auto b =
        fredholm::sampling_error_bounds(s.nodes, s.L0, s.K0, s.delta, s.kappa, s.kind);
    doc = fredholm::graph_document(g, b, s.delta);
  } else {
    doc = fredholm::graph_document(g);
  }
  art.write("graph.json", json_text(doc));
  art.finish();
  return 0;
}

// --- converge ----------------------------------------------------------------------

int cmd_converge(const CommonFlags& flags) {
  const ExperimentConfig cfg = fredholm::load_config(flags.config_path);
  const RunParams params = resolve_params(cfg, flags);
  if (!cfg.graphon || !cfg.convergence)
    throw fredholm::schema_error("config: converge needs 'graphon' and 'convergence' sections");
  const fredholm::ConvergenceSection& c = *cfg.convergence;
  const int n_paths = c.paths > 0 ? c.paths : params.paths;
  ArtifactWriter art(params.out, "converge", cfg, params);

  fredholm::ConvergenceRun run;
  if (c.mode == fredholm::RunMode::Given) {
    fredholm::GivenSequenceConfig gc;
    gc.graphon = cfg.graphon->spec;
    gc.N_values = c.N_values;
    gc.n_paths = n_paths;
    gc.seed = params.seed;
    gc.tol = params.tolerances.tol;
    gc.energy_tol = params.tolerances.energy_tol;
    gc.max_rank = params.tolerances.max_rank;
    gc.coercivity_tol = params.tolerances.coercivity_tol;
    gc.threads = params.threads;
    run = fredholm::run_given_sequence(gc);
  } else {
    fredholm::SampledRunConfig sc;
    sc.grid = cfg.graphon->spec.grid;
    sc.A_tilde = cfg.graphon->spec.A_tilde;
    sc.B_tilde = cfg.graphon->spec.B_tilde;
    sc.lambda = cfg.graphon->spec.lambda;
    sc.W = cfg.graphon->fn;
    sc.n_u = cfg.graphon->spec.graphon.n_u;
    sc.label_noise = cfg.graphon->spec.noise;
    sc.L0 = c.L0;
    sc.K0 = c.K0;
    sc.kind = c.kind;
    sc.N_values = c.N_values;
    sc.kappa_rule = c.kappa_rule;
    sc.delta = c.delta;
    sc.replications = c.replications;
    sc.n_paths = n_paths;
    sc.seed = params.seed;
    sc.tol = params.tolerances.tol;
    sc.energy_tol = params.tolerances.energy_tol;
    sc.max_rank = params.tolerances.max_rank;
    sc.coercivity_tol = params.tolerances.coercivity_tol;
    sc.threads = params.threads;
    run = fredholm::run_sampled(sc);
  }

  art.write("errors.csv", fredholm::errors_csv(run));
  art.write("summary.json", fredholm::summary_json_text(run));
  art.finish();
  return 0;
}

// --- example ----------------------------------------------------------------------

int cmd_example(const std::string& family, const std::string& params_path,
                const std::string& out_file) {
  const json doc = json::parse(fredholm::read_text_file(params_path), nullptr, false);
  if (doc.is_discarded())
    throw fredholm::schema_error("params: " + params_path + ": invalid JSON");
  if (!doc.is_object() || !doc.contains("grid") || !doc.contains("params"))
    throw fredholm::schema_error("params: expected {\"grid\": {...}, \"params\": {...}}");
  for (const auto& item : doc.items())
    if (item.key() != "grid" && item.key() != "params")
      throw fredholm::schema_error("params: unknown key '" + item.key() + "'");
  const json& jg = doc["grid"];
  for (const auto& item : jg.items())
    if (item.key() != "T" && item.key() != "n_t")
      throw fredholm::schema_error("params.grid: unknown key '" + item.key() + "'");
  if (!jg.contains("T") || !jg["T"].is_number() || !(jg["T"].get<double>() > 0))
    throw fredholm::schema_error("params.grid.T: expected a positive number");
  if (!jg.contains("n_t") || !jg["n_t"].is_number_integer() || jg["n_t"].get<long long>() < 1)
    throw fredholm::schema_error("params.grid.n_t: expected a positive integer");
  const fredholm::TimeGrid grid =
      fredholm::make_grid(jg["T"].get<double>(), static_cast<int>(jg["n_t"].get<long long>()));

  const fredholm::FamilyGame fam = fredholm::family_from_config(family, doc["params"], grid);
  fredholm::build_family_game(fam);  // prove the model reduces to solver form
  fredholm::write_text_file(out_file,
                            json_text(fredholm::family_game_document(fam, grid)));
  std::printf("wrote %s\n", out_file.c_str());
  return 0;
}

void add_common(CLI::App* cmd, CommonFlags& flags, bool needs_out) {
  cmd->add_option("--config", flags.config_path, "experiment config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  if (needs_out) cmd->add_option("--out", flags.out, "artifact directory (default: config 'output')");
  cmd->add_option("--seed", flags.seed, "override the config seed");
  cmd->add_option("--paths", flags.paths, "override the Monte Carlo path count");
  cmd->add_option("--tol", flags.tol, "override the solver tolerance");
  cmd->add_option("--threads", flags.threads, "worker pool size (0 = machine parallelism)")
      ->envname("FREDHOLM_GAMES_THREADS");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nash equilibria of Volterra linear-quadratic games: finite players, graphons, "
               "sampled graphs, and finite-to-continuum convergence studies"};
  app.require_subcommand(1);

  CommonFlags validate_flags, finite_flags, graphon_flags, sample_flags, converge_flags;
  std::string family, params_path, example_out = "game.json";

  add_common(app.add_subcommand("validate", "schema + assumption checks, c0/c_W report"),
             validate_flags, false);
  add_common(app.add_subcommand("solve-finite", "equilibrium of the finite-player game"),
             finite_flags, true);
  add_common(app.add_subcommand("solve-graphon", "spectral equilibrium of the continuum game"),
             graphon_flags, true);
  add_common(app.add_subcommand("sample", "draw a finite graph from the graphon"), sample_flags,
             true);
  add_common(app.add_subcommand("converge", "finite-to-continuum error study"), converge_flags,
             true);
  CLI::App* example = app.add_subcommand("example", "generate a model-family game config");
  example->add_option("family", family, "systemic | network | simple-graph")->required();
  example->add_option("--params", params_path, "family parameters (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  example->add_option("--out", example_out, "output config file (default game.json)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("validate")) return cmd_validate(validate_flags);
    if (app.got_subcommand("solve-finite")) return cmd_solve_finite(finite_flags);
    if (app.got_subcommand("solve-graphon")) return cmd_solve_graphon(graphon_flags);
    if (app.got_subcommand("sample")) return cmd_sample(sample_flags);
    if (app.got_subcommand("converge")) return cmd_converge(converge_flags);
    if (app.got_subcommand("example")) return cmd_example(family, params_path, example_out);
  } catch (const fredholm::schema_error& e) {
    std::fprintf(stderr, "error (schema): %s\n", e.what());
    return 2;
  } catch (const fredholm::assumption_error& e) {
    std::fprintf(stderr, "error (assumption): %s\n", e.what());
    return 3;
  } catch (const fredholm::solver_error& e) {
    std::fprintf(stderr, "error (solver): %s\n", e.what());
    return 4;
  } catch (const fredholm::numeric_error& e) {
    std::fprintf(stderr, "error (numeric): %s\n", e.what());
    return 5;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error (schema): %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error (schema): %s\n", e.what());
    return 2;
  }
  return 0;
}
