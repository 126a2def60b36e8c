// fracid: spectral simulation and exponent identification for the fractional
// evolution equation du + L^s u dt = dW, driven by a JSON run config.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fracid/fracid.hpp"

namespace {

using nlohmann::json;

struct CliState {
  std::string config_path;
  std::string output_dir;  // flag or FRACID_OUTPUT_DIR; empty means unset
  std::uint64_t seed = 0;
  bool seed_set = false;
  unsigned threads = 0;  // 0 means unset
  bool quiet = false;
  double s = 0.0;
  bool s_set = false;
  bool dump_paths = false;
  bool curves = false;
};

// Global flags are registered on every subcommand so they may appear before
// or after the subcommand name. Flags win over config-file fields.
void add_common_options(CLI::App* cmd, CliState& state) {
  cmd->add_option("--config", state.config_path, "Run configuration JSON file")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--output", state.output_dir,
                  "Output directory (default: config output_dir, else ./out)")
      ->envname("FRACID_OUTPUT_DIR");
  cmd->add_option("--seed", state.seed, "Override the run seed")
      ->each([&state](const std::string&) { state.seed_set = true; });
  cmd->add_option("--threads", state.threads, "Worker thread cap")
      ->check(CLI::PositiveNumber);
  cmd->add_flag("--quiet", state.quiet, "Silence warnings");
}

fracid::RunConfig load_config(const CliState& state) {
  const std::filesystem::path path(state.config_path);
  std::ifstream in(path);
  if (!in) {
    throw fracid::ConfigError("cannot open config file '" + path.string() + "'");
  }
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw fracid::ConfigError("config file '" + path.string() + "': " + e.what());
  }
  if (!doc.is_object()) {
    throw fracid::ConfigError("config root must be a JSON object");
  }
  // Overrides are merged into the document before parsing so validation and
  // the config hash always see the effective values.
  if (state.seed_set) doc["seed"] = state.seed;
  if (state.threads > 0) doc["threads"] = state.threads;
  if (state.s_set) doc["s"] = state.s;
  return fracid::RunConfig::from_json(doc, path.parent_path());
}

std::filesystem::path resolve_output_dir(const CliState& state,
                                         const fracid::RunConfig& cfg) {
  if (!state.output_dir.empty()) return state.output_dir;
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  return "out";
}

json meta_json(const fracid::RunConfig& cfg, json seeds) {
  return {{"artifact_version", fracid::kVersion},
          {"rng", fracid::kRngName},
          {"config_hash", cfg.config_hash()},
          {"seeds", std::move(seeds)}};
}

json target_sidecar(const fracid::RunConfig& cfg, const fracid::TargetField& target) {
  json doc = fracid::target_json(target);
  doc["meta"] = meta_json(cfg, target.noiseless ? json::object()
                                                : json{{"target", target.seed}});
  return doc;
}

int cmd_simulate(const CliState& state) {
  const fracid::RunConfig cfg = load_config(state);
  const fracid::SpectralModel& model = cfg.require_model();
  const fracid::TimeGrid& grid = cfg.require_grid();
  const fracid::InitialData& y0 = cfg.require_initial_data();
  const double s = cfg.require_s();
  const std::uint64_t seed = cfg.effective_seed();

  const fracid::BrownianLattice lattice(seed, model.n_modes(), grid);
  const fracid::ModalSolution solution =
      fracid::solve_path(model, y0, lattice, s, cfg.dense_cap);

  const std::filesystem::path out_dir = resolve_output_dir(state, cfg);
  std::filesystem::create_directories(out_dir);
  fracid::write_solution_csv(out_dir / "solution.csv", solution);

  std::vector<double> terminal(model.n_modes());
  double l2_sq = 0.0;
  for (std::size_t j = 1; j <= model.n_modes(); ++j) {
    terminal[j - 1] = solution.value(j, grid.n_steps);
    l2_sq += terminal[j - 1] * terminal[j - 1];
  }
  json summary = {{"s", s},
                  {"seed", seed},
                  {"grid", fracid::grid_json(grid)},
                  {"n_modes", model.n_modes()},
                  {"terminal",
                   {{"l2_norm_sq", l2_sq},
                    {"hs_norm_sq", fracid::hs_norm_sq(model, terminal, s)}}},
                  {"meta", meta_json(cfg, {{"path", seed}})}};
  fracid::write_json(out_dir / "summary.json", summary);

  if (state.dump_paths) {
    fracid::write_noise_csv(out_dir / "noise.csv", lattice);
    json noise_meta = {{"seed", seed},
                       {"generator", fracid::kRngName},
                       {"grid", fracid::grid_json(grid)},
                       {"n_modes", model.n_modes()},
                       {"meta", meta_json(cfg, {{"path", seed}})}};
    fracid::write_json(out_dir / "noise.json", noise_meta);
  }
  return 0;
}

int cmd_optimize(const CliState& state) {
  const fracid::RunConfig cfg = load_config(state);
  const fracid::SpectralModel& model = cfg.require_model();
  const fracid::TimeGrid& grid = cfg.require_grid();
  const fracid::InitialData& y0 = cfg.require_initial_data();
  const fracid::Penalty& penalty = cfg.require_penalty();
  cfg.check_optimizer_domain();
  const fracid::TargetField target = cfg.make_target();
  const std::uint64_t seed = cfg.effective_seed();

  const fracid::OptimalityReport report = fracid::solve_single_path(
      model, y0, grid, target, penalty, cfg.optimizer, seed, cfg.dense_cap);

  const std::filesystem::path out_dir = resolve_output_dir(state, cfg);
  std::filesystem::create_directories(out_dir);
  json seeds = {{"path", seed}};
  if (!target.noiseless &&
      target.provenance == fracid::TargetField::Provenance::FromSolution) {
    seeds["target"] = target.seed;
  }
  json doc = fracid::report_json(report);
  doc["penalty"] = fracid::penalty_json(penalty);
  doc["target"] = fracid::target_json(target);
  doc["meta"] = meta_json(cfg, seeds);
  fracid::write_json(out_dir / "report.json", doc);
  fracid::write_trace_csv(out_dir / "trace.csv", report.trace);
  fracid::write_target_csv(out_dir / "target.csv", target);
  fracid::write_json(out_dir / "target.json", target_sidecar(cfg, target));
  return 0;
}

int cmd_montecarlo(const CliState& state) {
  const fracid::RunConfig cfg = load_config(state);
  const fracid::SpectralModel& model = cfg.require_model();
  const fracid::TimeGrid& grid = cfg.require_grid();
  const fracid::InitialData& y0 = cfg.require_initial_data();
  const fracid::Penalty& penalty = cfg.require_penalty();
  const fracid::EnsembleConfig& ensemble = cfg.require_ensemble();
  cfg.check_optimizer_domain();
  const fracid::TargetField target = cfg.make_target();

  const fracid::EnsembleSummary summary =
      fracid::run_ensemble(model, y0, grid, target, penalty, cfg.optimizer, ensemble,
                           cfg.threads, cfg.dense_cap);

  const std::filesystem::path out_dir = resolve_output_dir(state, cfg);
  std::filesystem::create_directories(out_dir);
  json seeds = {{"master", ensemble.master_seed}};
  if (!target.noiseless &&
      target.provenance == fracid::TargetField::Provenance::FromSolution) {
    seeds["target"] = target.seed;
  }
  json doc = fracid::ensemble_json(summary);
  doc["penalty"] = fracid::penalty_json(penalty);
  doc["target"] = fracid::target_json(target);
  doc["meta"] = meta_json(cfg, seeds);
  fracid::write_json(out_dir / "summary.json", doc);
  fracid::write_paths_csv(out_dir / "paths.csv", summary.per_path);
  fracid::write_target_csv(out_dir / "target.csv", target);
  fracid::write_json(out_dir / "target.json", target_sidecar(cfg, target));
  return 0;
}

int cmd_diagnose(const CliState& state) {
  const fracid::RunConfig cfg = load_config(state);
  const fracid::SpectralModel& model = cfg.require_model();
  const fracid::TimeGrid& grid = cfg.require_grid();
  const fracid::InitialData& y0 = cfg.require_initial_data();
  const double s = cfg.require_s();
  const std::uint64_t seed = cfg.effective_seed();
  const fracid::DiagnosticsConfig& diag = cfg.diagnostics;

  const fracid::IsometryCheck isometry = fracid::ito_isometry_check(
      model, grid, s, diag.n_paths, diag.t_checkpoints, seed);

  const fracid::BrownianLattice lattice(seed, model.n_modes(), grid);
  json hs_entries = json::array();
  for (double t : diag.t_checkpoints) {
    if (t <= 0.0) continue;  // the bound constant kappa(t) diverges at t = 0
    hs_entries.push_back(fracid::hs_bound_json(
        fracid::hs_membership_check(model, y0, lattice, s, t, diag.n_paths)));
  }

  const fracid::L2BoundEntry l2 =
      fracid::l2_apriori_check(model, y0, s, grid, diag.n_paths, seed);

  const fracid::ModalSolution solution =
      fracid::solve_path(model, y0, lattice, s, cfg.dense_cap);
  const fracid::HolderEstimate holder =
      fracid::holder_estimate(solution, diag.lags, diag.n_boot);

  const fracid::FactorizationCheck factorization =
      fracid::factorization_check(model, s, diag.beta, grid.t_final);

  const std::filesystem::path out_dir = resolve_output_dir(state, cfg);
  std::filesystem::create_directories(out_dir);
  json doc = {{"s", s},
              {"isometry", fracid::isometry_json(isometry)},
              {"hs_bound", hs_entries},
              {"l2_bound", fracid::l2_bound_json(l2)},
              {"holder", fracid::holder_json(holder)},
              {"factorization", fracid::factorization_json(factorization)},
              {"meta", meta_json(cfg, {{"base", seed}})}};
  fracid::write_json(out_dir / "report.json", doc);
  if (state.curves) {
    fracid::write_isometry_csv(out_dir / "isometry.csv", isometry);
  }
  return 0;
}

int cmd_admissible(const CliState& state) {
  const fracid::RunConfig cfg = load_config(state);
  const fracid::SpectralModel& model = cfg.require_model();
  const fracid::AdmissibleInterval interval =
      fracid::admissible_interval(model, cfg.s_max);
  json doc = fracid::admissible_json(interval);
  const std::optional<double> trace_edge = fracid::noise_trace_upper_s(model);
  doc["noise_trace_upper_s"] = trace_edge ? json(*trace_edge) : json(nullptr);
  doc["meta"] = meta_json(cfg, json::object());
  std::cout << doc.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral simulation and exponent identification for du + L^s u dt = dW"};
  app.require_subcommand(1);
  CliState state;

  CLI::App* simulate = app.add_subcommand("simulate", "Solve one path and write it out");
  add_common_options(simulate, state);
  simulate->add_option("--s", state.s, "Fractional exponent")
      ->each([&state](const std::string&) { state.s_set = true; });
  simulate->add_flag("--dump-paths", state.dump_paths,
                     "Also write the Brownian increments");

  CLI::App* optimize =
      app.add_subcommand("optimize", "Identify the exponent on one noise path");
  add_common_options(optimize, state);

  CLI::App* montecarlo =
      app.add_subcommand("montecarlo", "Identify the exponent across an ensemble");
  add_common_options(montecarlo, state);

  CLI::App* diagnose =
      app.add_subcommand("diagnose", "Run the moment and regularity checks");
  add_common_options(diagnose, state);
  diagnose->add_option("--s", state.s, "Fractional exponent")
      ->each([&state](const std::string&) { state.s_set = true; });
  diagnose->add_flag("--curves", state.curves, "Also write the isometry curve CSV");

  CLI::App* admissible =
      app.add_subcommand("admissible", "Print the admissible exponent interval");
  add_common_options(admissible, state);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (state.quiet) {
    fracid::warnings_enabled() = false;
  }

  try {
    if (app.got_subcommand(simulate)) return cmd_simulate(state);
    if (app.got_subcommand(optimize)) return cmd_optimize(state);
    if (app.got_subcommand(montecarlo)) return cmd_montecarlo(state);
    if (app.got_subcommand(diagnose)) return cmd_diagnose(state);
    return cmd_admissible(state);
  } catch (const fracid::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
