#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "fracid/errors.hpp"
#include "fracid/io.hpp"
#include "fracid/montecarlo.hpp"
#include "fracid/objective.hpp"
#include "fracid/optimizer.hpp"
#include "fracid/spectrum.hpp"
#include "fracid/state.hpp"
#include "fracid/warnings.hpp"

namespace fracid {

namespace detail {

inline std::string field_name(const std::string& section, const std::string& key) {
  return section.empty() ? key : section + "." + key;
}

// Unknown keys are rejected instead of ignored: a typo in a tolerance name
// must not silently run with the default.
inline void check_keys(const nlohmann::json& obj, const std::string& section,
                       std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ConfigError("unknown config field '" + field_name(section, item.key()) +
                        "'");
    }
  }
}

inline const nlohmann::json& require_key(const nlohmann::json& obj,
                                         const std::string& section,
                                         const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    throw ConfigError("missing config field '" + field_name(section, key) + "'");
  }
  return *it;
}

inline double as_double(const nlohmann::json& value, const std::string& field) {
  if (!value.is_number()) {
    throw ConfigError("config field '" + field + "' must be a number");
  }
  return value.get<double>();
}

inline std::uint64_t as_u64(const nlohmann::json& value, const std::string& field) {
  // Accept any non-negative integer; in-memory documents built with int
  // literals carry the signed type even when the value is positive.
  if (value.is_number_unsigned()) {
    return value.get<std::uint64_t>();
  }
  if (value.is_number_integer() && value.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(value.get<std::int64_t>());
  }
  throw ConfigError("config field '" + field + "' must be an unsigned integer");
}

inline bool as_bool(const nlohmann::json& value, const std::string& field) {
  if (!value.is_boolean()) {
    throw ConfigError("config field '" + field + "' must be a boolean");
  }
  return value.get<bool>();
}

inline std::string as_string(const nlohmann::json& value, const std::string& field) {
  if (!value.is_string()) {
    throw ConfigError("config field '" + field + "' must be a string");
  }
  return value.get<std::string>();
}

inline std::vector<double> as_double_array(const nlohmann::json& value,
                                           const std::string& field) {
  if (!value.is_array()) {
    throw ConfigError("config field '" + field + "' must be an array of numbers");
  }
  std::vector<double> out;
  out.reserve(value.size());
  for (const auto& v : value) {
    out.push_back(as_double(v, field));
  }
  return out;
}

inline double get_double(const nlohmann::json& obj, const std::string& section,
                         const char* key) {
  return as_double(require_key(obj, section, key), field_name(section, key));
}

inline double opt_double(const nlohmann::json& obj, const std::string& section,
                         const char* key, double fallback) {
  const auto it = obj.find(key);
  return it == obj.end() ? fallback : as_double(*it, field_name(section, key));
}

inline std::uint64_t get_u64(const nlohmann::json& obj, const std::string& section,
                             const char* key) {
  return as_u64(require_key(obj, section, key), field_name(section, key));
}

inline std::string slurp_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("cannot open '" + path.string() + "' for reading");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace detail

struct DiagnosticsConfig {
  std::size_t n_paths = 2000;
  std::vector<double> t_checkpoints = {0.25, 0.5, 1.0};
  double beta = 0.25;
  std::vector<std::size_t> lags = {1, 2, 4, 8, 16, 32};
  std::size_t n_boot = 400;
};

// How the target field y_D is specified; materialization happens in
// RunConfig::make_target once model and grid are known.
struct TargetSpec {
  enum class Kind { Constant, FromSolution, FromFile };

  Kind kind = Kind::Constant;
  double value = 0.0;                  // Constant
  double s_true = 1.0;                 // FromSolution
  std::optional<std::uint64_t> seed;   // FromSolution; absent -> noiseless mean
  std::filesystem::path file;          // FromFile
  ModalField file_field;               // FromFile, read at parse time
  std::uint64_t file_hash = 0;         // FromFile, FNV-1a of the raw bytes
};

// Parsed run description. Sections a command does not use may be absent;
// the require_* accessors raise ConfigError naming the missing section.
struct RunConfig {
  std::optional<SpectralModel> model;
  std::optional<TimeGrid> grid;
  std::optional<InitialData> initial_data;
  std::optional<Penalty> penalty;
  std::optional<TargetSpec> target;
  OptimizerConfig optimizer;
  bool optimizer_present = false;
  std::optional<EnsembleConfig> ensemble;
  DiagnosticsConfig diagnostics;
  std::optional<double> s;
  std::optional<std::uint64_t> seed;
  double s_max = std::numeric_limits<double>::infinity();
  std::string output_dir;
  std::size_t dense_cap = kDefaultDenseCap;
  unsigned threads = 1;

  static RunConfig from_json(const nlohmann::json& doc,
                             const std::filesystem::path& base_dir = ".");
  static RunConfig from_file(const std::filesystem::path& path);

  const SpectralModel& require_model() const {
    if (!model) throw ConfigError("config section 'model' is required");
    return *model;
  }
  const TimeGrid& require_grid() const {
    if (!grid) throw ConfigError("config section 'grid' is required");
    return *grid;
  }
  const InitialData& require_initial_data() const {
    if (!initial_data) throw ConfigError("config section 'initial_data' is required");
    return *initial_data;
  }
  const Penalty& require_penalty() const {
    if (!penalty) throw ConfigError("config section 'penalty' is required");
    return *penalty;
  }
  const EnsembleConfig& require_ensemble() const {
    if (!ensemble) throw ConfigError("config section 'ensemble' is required");
    return *ensemble;
  }
  double require_s() const {
    if (!s) throw ConfigError("config field 's' is required (or pass --s)");
    return *s;
  }
  std::uint64_t effective_seed() const { return seed.value_or(0); }

  TargetField make_target() const;
  void check_optimizer_domain() const;
  void validate() const;

  nlohmann::json canonical_json() const;
  std::string config_hash() const {
    return hash_hex(fnv1a64(canonical_json().dump()));
  }
};

namespace detail {

inline EigenvalueLaw parse_eigenvalue_law(const nlohmann::json& obj) {
  const std::string section = "model.eigenvalue_law";
  const std::string type =
      as_string(require_key(obj, section, "type"), section + ".type");
  if (type == "power_law") {
    check_keys(obj, section, {"type", "c", "q"});
    PowerLawEigenvalues law;
    law.c = opt_double(obj, section, "c", law.c);
    law.q = opt_double(obj, section, "q", law.q);
    return law;
  }
  if (type == "explicit") {
    check_keys(obj, section, {"type", "values"});
    ExplicitEigenvalues law;
    law.values = as_double_array(require_key(obj, section, "values"),
                                 section + ".values");
    return law;
  }
  throw ConfigError("config field '" + section +
                    ".type' must be \"power_law\" or \"explicit\"");
}

inline CovarianceLaw parse_covariance_law(const nlohmann::json& obj) {
  const std::string section = "model.covariance_law";
  const std::string type =
      as_string(require_key(obj, section, "type"), section + ".type");
  if (type == "matched_decay") {
    check_keys(obj, section, {"type", "epsilon", "s_ref"});
    MatchedDecayCovariance law;
    law.epsilon = opt_double(obj, section, "epsilon", law.epsilon);
    law.s_ref = opt_double(obj, section, "s_ref", law.s_ref);
    return law;
  }
  if (type == "power_law") {
    check_keys(obj, section, {"type", "c0", "r"});
    PowerLawCovariance law;
    law.c0 = opt_double(obj, section, "c0", law.c0);
    law.r = opt_double(obj, section, "r", law.r);
    return law;
  }
  if (type == "explicit") {
    check_keys(obj, section, {"type", "values"});
    ExplicitCovariance law;
    law.values = as_double_array(require_key(obj, section, "values"),
                                 section + ".values");
    return law;
  }
  throw ConfigError("config field '" + section +
                    ".type' must be \"matched_decay\", \"power_law\", or \"explicit\"");
}

inline Penalty parse_penalty(const nlohmann::json& obj) {
  const std::string section = "penalty";
  const std::string type =
      as_string(require_key(obj, section, "type"), "penalty.type");
  if (type == "barrier") {
    check_keys(obj, section, {"type", "L", "weight"});
    BarrierPenalty p;
    p.L = opt_double(obj, section, "L", p.L);
    p.weight = opt_double(obj, section, "weight", p.weight);
    if (!(p.L > 0.0)) {
      throw ConfigError("config field 'penalty.L' must be positive");
    }
    if (!(p.weight > 0.0)) {
      throw ConfigError("config field 'penalty.weight' must be positive");
    }
    return p;
  }
  if (type == "exp_over_s") {
    check_keys(obj, section, {"type", "weight"});
    ExpOverSPenalty p;
    p.weight = opt_double(obj, section, "weight", p.weight);
    if (!(p.weight > 0.0)) {
      throw ConfigError("config field 'penalty.weight' must be positive");
    }
    return p;
  }
  if (type == "custom") {
    check_keys(obj, section, {"type", "s", "phi", "dphi", "d2phi"});
    CustomPenalty p;
    p.s = as_double_array(require_key(obj, section, "s"), "penalty.s");
    p.phi = as_double_array(require_key(obj, section, "phi"), "penalty.phi");
    p.dphi = as_double_array(require_key(obj, section, "dphi"), "penalty.dphi");
    p.d2phi = as_double_array(require_key(obj, section, "d2phi"), "penalty.d2phi");
    return p;
  }
  throw ConfigError(
      "config field 'penalty.type' must be \"barrier\", \"exp_over_s\", or "
      "\"custom\"");
}

inline std::vector<std::size_t> parse_lags(const nlohmann::json& value,
                                           const std::string& field) {
  if (!value.is_array()) {
    throw ConfigError("config field '" + field + "' must be an array of integers");
  }
  std::vector<std::size_t> lags;
  for (const auto& v : value) {
    lags.push_back(as_u64(v, field));
  }
  return lags;
}

}  // namespace detail

inline RunConfig RunConfig::from_json(const nlohmann::json& doc,
                                      const std::filesystem::path& base_dir) {
  if (!doc.is_object()) {
    throw ConfigError("config root must be a JSON object");
  }
  detail::check_keys(doc, "",
                     {"model", "grid", "initial_data", "penalty", "target",
                      "optimizer", "ensemble", "diagnostics", "s", "seed", "s_max",
                      "output_dir", "dense_cap", "threads"});
  RunConfig cfg;

  if (const auto it = doc.find("dense_cap"); it != doc.end()) {
    cfg.dense_cap = detail::as_u64(*it, "dense_cap");
    if (cfg.dense_cap == 0) {
      throw ConfigError("config field 'dense_cap' must be positive");
    }
  }

  if (const auto it = doc.find("model"); it != doc.end()) {
    const nlohmann::json& m = *it;
    detail::check_keys(m, "model",
                       {"eigenvalue_law", "covariance_law", "alpha", "n_modes"});
    const EigenvalueLaw ev =
        detail::parse_eigenvalue_law(detail::require_key(m, "model", "eigenvalue_law"));
    const CovarianceLaw cov =
        detail::parse_covariance_law(detail::require_key(m, "model", "covariance_law"));
    const double alpha = detail::get_double(m, "model", "alpha");
    const std::size_t n_modes = detail::get_u64(m, "model", "n_modes");
    cfg.model.emplace(ev, cov, alpha, n_modes);
  }

  if (const auto it = doc.find("grid"); it != doc.end()) {
    const nlohmann::json& g = *it;
    detail::check_keys(g, "grid", {"t_final", "n_steps"});
    const double t_final = detail::get_double(g, "grid", "t_final");
    if (!(t_final > 0.0)) {
      throw ConfigError("config field 'grid.t_final' must be positive");
    }
    const std::uint64_t n_steps = detail::get_u64(g, "grid", "n_steps");
    if (n_steps == 0) {
      throw ConfigError("config field 'grid.n_steps' must be positive");
    }
    cfg.grid.emplace(t_final, static_cast<std::size_t>(n_steps));
  }

  if (const auto it = doc.find("initial_data"); it != doc.end()) {
    const nlohmann::json& id = *it;
    detail::check_keys(id, "initial_data", {"preset", "value", "values", "file"});
    const int sources = static_cast<int>(id.contains("preset")) +
                        static_cast<int>(id.contains("values")) +
                        static_cast<int>(id.contains("file"));
    if (sources != 1) {
      throw ConfigError(
          "config section 'initial_data' needs exactly one of 'preset', 'values', "
          "'file'");
    }
    if (id.contains("preset")) {
      const std::string preset =
          detail::as_string(id["preset"], "initial_data.preset");
      const std::size_t n = cfg.require_model().n_modes();
      if (preset == "zero") {
        cfg.initial_data = InitialData::zero(n);
      } else if (preset == "one_over_j") {
        cfg.initial_data = InitialData::one_over_j(n);
      } else if (preset == "constant") {
        cfg.initial_data = InitialData::constant(
            n, detail::get_double(id, "initial_data", "value"));
      } else {
        throw ConfigError(
            "config field 'initial_data.preset' must be \"zero\", \"one_over_j\", "
            "or \"constant\"");
      }
      if (preset != "constant" && id.contains("value")) {
        throw ConfigError(
            "config field 'initial_data.value' only applies to the \"constant\" "
            "preset");
      }
    } else if (id.contains("values")) {
      cfg.initial_data =
          InitialData{detail::as_double_array(id["values"], "initial_data.values")};
    } else {
      const std::filesystem::path file =
          base_dir / detail::as_string(id["file"], "initial_data.file");
      cfg.initial_data = InitialData{read_coefficients(file)};
    }
  } else if (cfg.model) {
    cfg.initial_data = InitialData::zero(cfg.model->n_modes());
  }

  if (const auto it = doc.find("penalty"); it != doc.end()) {
    cfg.penalty = detail::parse_penalty(*it);
    penalty_domain(*cfg.penalty);  // validates tables and weights up front
  }

  if (const auto it = doc.find("target"); it != doc.end()) {
    const nlohmann::json& t = *it;
    const std::string type =
        detail::as_string(detail::require_key(t, "target", "type"), "target.type");
    TargetSpec spec;
    if (type == "constant") {
      detail::check_keys(t, "target", {"type", "value"});
      spec.kind = TargetSpec::Kind::Constant;
      spec.value = detail::get_double(t, "target", "value");
    } else if (type == "from_solution") {
      detail::check_keys(t, "target", {"type", "s_true", "seed"});
      spec.kind = TargetSpec::Kind::FromSolution;
      spec.s_true = detail::get_double(t, "target", "s_true");
      if (!(spec.s_true > 0.0)) {
        throw ConfigError("config field 'target.s_true' must be positive");
      }
      if (t.contains("seed")) {
        spec.seed = detail::as_u64(t["seed"], "target.seed");
      }
    } else if (type == "from_file") {
      detail::check_keys(t, "target", {"type", "file"});
      spec.kind = TargetSpec::Kind::FromFile;
      spec.file = base_dir / detail::as_string(t["file"], "target.file");
      spec.file_hash = fnv1a64(detail::slurp_file(spec.file));
      spec.file_field = read_target_field(spec.file, cfg.dense_cap);
    } else {
      throw ConfigError(
          "config field 'target.type' must be \"constant\", \"from_solution\", or "
          "\"from_file\"");
    }
    cfg.target = std::move(spec);
  }

  if (const auto it = doc.find("optimizer"); it != doc.end()) {
    const nlohmann::json& o = *it;
    detail::check_keys(o, "optimizer",
                       {"s_lo", "s_hi", "grid_points", "newton_tol",
                        "max_newton_iters", "bisection_fallback"});
    cfg.optimizer_present = true;
    cfg.optimizer.s_lo = detail::opt_double(o, "optimizer", "s_lo", cfg.optimizer.s_lo);
    cfg.optimizer.s_hi = detail::opt_double(o, "optimizer", "s_hi", cfg.optimizer.s_hi);
    if (o.contains("grid_points")) {
      cfg.optimizer.grid_points =
          static_cast<int>(detail::as_u64(o["grid_points"], "optimizer.grid_points"));
    }
    cfg.optimizer.newton_tol =
        detail::opt_double(o, "optimizer", "newton_tol", cfg.optimizer.newton_tol);
    if (o.contains("max_newton_iters")) {
      cfg.optimizer.max_newton_iters = static_cast<int>(
          detail::as_u64(o["max_newton_iters"], "optimizer.max_newton_iters"));
    }
    if (o.contains("bisection_fallback")) {
      cfg.optimizer.bisection_fallback =
          detail::as_bool(o["bisection_fallback"], "optimizer.bisection_fallback");
    }
    cfg.optimizer.validate();
  }

  if (const auto it = doc.find("ensemble"); it != doc.end()) {
    const nlohmann::json& e = *it;
    detail::check_keys(e, "ensemble", {"n_paths", "master_seed"});
    EnsembleConfig ec;
    ec.n_paths = detail::get_u64(e, "ensemble", "n_paths");
    ec.master_seed = detail::get_u64(e, "ensemble", "master_seed");
    ec.validate();
    cfg.ensemble = ec;
  }

  bool checkpoints_given = false;
  if (const auto it = doc.find("diagnostics"); it != doc.end()) {
    const nlohmann::json& d = *it;
    detail::check_keys(d, "diagnostics",
                       {"n_paths", "t_checkpoints", "beta", "lags", "n_boot"});
    if (d.contains("n_paths")) {
      cfg.diagnostics.n_paths = detail::as_u64(d["n_paths"], "diagnostics.n_paths");
      if (cfg.diagnostics.n_paths < 2) {
        throw ConfigError("config field 'diagnostics.n_paths' must be at least 2");
      }
    }
    if (d.contains("t_checkpoints")) {
      cfg.diagnostics.t_checkpoints =
          detail::as_double_array(d["t_checkpoints"], "diagnostics.t_checkpoints");
      checkpoints_given = true;
    }
    cfg.diagnostics.beta =
        detail::opt_double(d, "diagnostics", "beta", cfg.diagnostics.beta);
    if (!(cfg.diagnostics.beta >= 0.0) || !(cfg.diagnostics.beta < 0.5)) {
      throw ConfigError("config field 'diagnostics.beta' must lie in [0, 0.5)");
    }
    if (d.contains("lags")) {
      cfg.diagnostics.lags = detail::parse_lags(d["lags"], "diagnostics.lags");
    }
    if (d.contains("n_boot")) {
      cfg.diagnostics.n_boot = detail::as_u64(d["n_boot"], "diagnostics.n_boot");
    }
  }
  // Default checkpoints are horizon fractions, not absolute times; resolve
  // them against the grid so short horizons stay valid.
  if (!checkpoints_given && cfg.grid) {
    const double T = cfg.grid->t_final;
    cfg.diagnostics.t_checkpoints = {0.25 * T, 0.5 * T, T};
  }

  if (const auto it = doc.find("s"); it != doc.end()) {
    cfg.s = detail::as_double(*it, "s");
  }
  if (const auto it = doc.find("seed"); it != doc.end()) {
    cfg.seed = detail::as_u64(*it, "seed");
  }
  if (const auto it = doc.find("s_max"); it != doc.end()) {
    if (it->is_string() && it->get<std::string>() == "inf") {
      cfg.s_max = std::numeric_limits<double>::infinity();
    } else if (it->is_number()) {
      cfg.s_max = it->get<double>();
      if (!(cfg.s_max > 0.0)) {
        throw ConfigError("config field 's_max' must be positive");
      }
    } else {
      throw ConfigError("config field 's_max' must be a positive number or \"inf\"");
    }
  }
  if (const auto it = doc.find("output_dir"); it != doc.end()) {
    cfg.output_dir = detail::as_string(*it, "output_dir");
  }
  if (const auto it = doc.find("threads"); it != doc.end()) {
    cfg.threads = static_cast<unsigned>(detail::as_u64(*it, "threads"));
    if (cfg.threads == 0) {
      throw ConfigError("config field 'threads' must be positive");
    }
  }

  cfg.validate();
  return cfg;
}

inline RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file '" + path.string() + "'");
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file '" + path.string() + "': " + e.what());
  }
  return from_json(doc, path.parent_path());
}

inline void RunConfig::validate() const {
  if (initial_data && model &&
      initial_data->coeffs.size() != model->n_modes()) {
    throw ConfigError("initial_data has " +
                      std::to_string(initial_data->coeffs.size()) +
                      " coefficients but model.n_modes = " +
                      std::to_string(model->n_modes()));
  }
  if (s && !(*s > 0.0)) {
    throw ConfigError("config field 's' must be positive");
  }
  if (target && target->kind == TargetSpec::Kind::FromFile && model && grid) {
    const ModalField& f = target->file_field;
    if (f.n_modes() != model->n_modes() || f.n_nodes() != grid->n_nodes()) {
      throw ConfigError("target file '" + target->file.string() + "' has shape " +
                        std::to_string(f.n_modes()) + " x " +
                        std::to_string(f.n_nodes()) + " but the run needs " +
                        std::to_string(model->n_modes()) + " x " +
                        std::to_string(grid->n_nodes()));
    }
  }
  if (grid) {
    for (double t : diagnostics.t_checkpoints) {
      if (t < 0.0 || t > grid->t_final) {
        throw ConfigError(
            "config field 'diagnostics.t_checkpoints' has an entry outside [0, "
            "t_final]");
      }
    }
  }
  if (model && s) {
    const AdmissibleInterval interval = admissible_interval(*model, s_max);
    if (*s <= interval.s_min || (!interval.unbounded() && *s >= interval.s_max)) {
      warn("s = " + format_double(*s) + " lies outside the admissible interval (" +
           format_double(interval.s_min) + ", " +
           (interval.unbounded() ? std::string("inf") : format_double(interval.s_max)) +
           "); the noise trace may diverge");
    }
  }
  if (optimizer_present && model && penalty) {
    check_optimizer_domain();
  }
}

// The Newton scan range must stay strictly inside both the admissible
// interval (else the truncated trace misrepresents a divergent series) and
// the penalty domain (else the barrier is evaluated past its poles).
inline void RunConfig::check_optimizer_domain() const {
  const SpectralModel& m = require_model();
  const Penalty& p = require_penalty();
  const auto [p_lo, p_hi] = penalty_domain(p);
  // Custom tables are closed intervals, so their endpoints are evaluable;
  // barrier and exp-over-s domains are open at the poles.
  const bool closed = std::holds_alternative<CustomPenalty>(p);
  const bool in_domain = closed ? (optimizer.s_lo >= p_lo && optimizer.s_hi <= p_hi)
                                : (optimizer.s_lo > p_lo && optimizer.s_hi < p_hi);
  if (!in_domain) {
    throw ConfigError("optimizer range [" + format_double(optimizer.s_lo) + ", " +
                      format_double(optimizer.s_hi) +
                      "] is not inside the penalty domain (" + format_double(p_lo) +
                      ", " + format_double(p_hi) + ")");
  }
  const AdmissibleInterval interval = admissible_interval(m, s_max);
  const bool inside = optimizer.s_lo > interval.s_min &&
                      (interval.unbounded() || optimizer.s_hi < interval.s_max);
  if (!inside) {
    const std::string range =
        "(" + format_double(interval.s_min) + ", " +
        (interval.unbounded() ? std::string("inf") : format_double(interval.s_max)) +
        ")";
    if (interval.basis == AdmissibleBasis::Analytic) {
      throw ConfigError("optimizer range [" + format_double(optimizer.s_lo) + ", " +
                        format_double(optimizer.s_hi) +
                        "] is not inside the admissible interval " + range);
    }
    warn("optimizer range [" + format_double(optimizer.s_lo) + ", " +
         format_double(optimizer.s_hi) +
         "] leaves the heuristic admissible interval " + range);
  }
}

inline TargetField RunConfig::make_target() const {
  if (!target) throw ConfigError("config section 'target' is required");
  const SpectralModel& m = require_model();
  const TimeGrid& g = require_grid();
  switch (target->kind) {
    case TargetSpec::Kind::Constant:
      return target_constant(m.n_modes(), g, target->value, dense_cap);
    case TargetSpec::Kind::FromSolution:
      return target_from_solution(m, require_initial_data(), g, target->s_true,
                                  target->seed, dense_cap);
    case TargetSpec::Kind::FromFile:
    default: {
      TargetField out;
      out.field = target->file_field;
      out.provenance = TargetField::Provenance::FromFile;
      return out;
    }
  }
}

// Canonical form of the effective run semantics. Spelling variations that
// cannot change results (presets vs explicit arrays, defaulted vs spelled-out
// tolerances) normalize to the same document; output_dir and threads are
// excluded because they cannot change results either.
inline nlohmann::json RunConfig::canonical_json() const {
  nlohmann::json doc;
  if (model) doc["model"] = model_json(*model);
  if (grid) doc["grid"] = grid_json(*grid);
  if (initial_data) doc["initial_data"] = {{"values", initial_data->coeffs}};
  if (penalty) doc["penalty"] = penalty_json(*penalty);
  if (target) {
    nlohmann::json t;
    switch (target->kind) {
      case TargetSpec::Kind::Constant:
        t = {{"type", "constant"}, {"value", target->value}};
        break;
      case TargetSpec::Kind::FromSolution:
        t = {{"type", "from_solution"}, {"s_true", target->s_true}};
        if (target->seed) t["seed"] = *target->seed;
        break;
      case TargetSpec::Kind::FromFile:
        t = {{"type", "from_file"}, {"content_hash", hash_hex(target->file_hash)}};
        break;
    }
    doc["target"] = t;
  }
  doc["optimizer"] = {{"s_lo", optimizer.s_lo},
                      {"s_hi", optimizer.s_hi},
                      {"grid_points", optimizer.grid_points},
                      {"newton_tol", optimizer.newton_tol},
                      {"max_newton_iters", optimizer.max_newton_iters},
                      {"bisection_fallback", optimizer.bisection_fallback}};
  if (ensemble) {
    doc["ensemble"] = {{"n_paths", ensemble->n_paths},
                       {"master_seed", ensemble->master_seed}};
  }
  doc["diagnostics"] = {{"n_paths", diagnostics.n_paths},
                        {"t_checkpoints", diagnostics.t_checkpoints},
                        {"beta", diagnostics.beta},
                        {"lags", diagnostics.lags},
                        {"n_boot", diagnostics.n_boot}};
  if (s) doc["s"] = *s;
  doc["seed"] = effective_seed();
  if (std::isinf(s_max)) {
    doc["s_max"] = "inf";
  } else {
    doc["s_max"] = s_max;
  }
  doc["dense_cap"] = dense_cap;
  return doc;
}

}  // namespace fracid
