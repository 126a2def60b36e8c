#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fracid/diagnostics.hpp"
#include "fracid/errors.hpp"
#include "fracid/montecarlo.hpp"
#include "fracid/noise.hpp"
#include "fracid/objective.hpp"
#include "fracid/optimizer.hpp"
#include "fracid/spectrum.hpp"
#include "fracid/state.hpp"
#include "fracid/version.hpp"

namespace fracid {

// 17 significant digits round-trip any double exactly; to_chars is
// locale-free, so CSV output never grows a comma decimal separator.
inline std::string format_double(double v) {
  char buf[64];
  const auto res =
      std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

// FNV-1a, the 64-bit variant. Used to fingerprint the canonical config dump.
inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hash_hex(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[h & 0xF];
    h >>= 4;
  }
  return out;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw ConfigError("cannot open '" + path.string() + "' for writing");
  }
  return out;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open '" + path.string() + "' for reading");
  }
  return in;
}

inline double parse_csv_double(const std::string& cell, const std::filesystem::path& path,
                               std::size_t line) {
  double v = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc{} || res.ptr != end) {
    throw ConfigError("bad numeric cell '" + cell + "' in " + path.string() + ":" +
                      std::to_string(line));
  }
  return v;
}

}  // namespace detail

inline void write_noise_csv(const std::filesystem::path& path,
                            const BrownianLattice& lattice) {
  std::ofstream out = detail::open_out(path);
  out << "mode,step,increment\n";
  for (std::size_t j = 1; j <= lattice.n_modes(); ++j) {
    for (std::size_t n = 0; n < lattice.grid().n_steps; ++n) {
      out << j << ',' << n << ',' << format_double(lattice.increment(j, n)) << '\n';
    }
  }
}

inline void write_solution_csv(const std::filesystem::path& path,
                               const ModalSolution& solution) {
  std::ofstream out = detail::open_out(path);
  out << "mode,step,mean,convolution\n";
  for (std::size_t j = 1; j <= solution.n_modes(); ++j) {
    for (std::size_t n = 0; n < solution.grid().n_nodes(); ++n) {
      out << j << ',' << n << ',' << format_double(solution.mean().at(j, n)) << ','
          << format_double(solution.convolution().at(j, n)) << '\n';
    }
  }
}

inline void write_target_csv(const std::filesystem::path& path,
                             const TargetField& target) {
  std::ofstream out = detail::open_out(path);
  out << "mode,step,value\n";
  for (std::size_t j = 1; j <= target.field.n_modes(); ++j) {
    for (std::size_t n = 0; n < target.field.n_nodes(); ++n) {
      out << j << ',' << n << ',' << format_double(target.field.at(j, n)) << '\n';
    }
  }
}

// Strict reader for the `mode,step,value` format: the rows must tile the
// full mode x node rectangle exactly once. Shape is inferred from the
// largest indices seen.
inline ModalField read_target_field(const std::filesystem::path& path,
                                    std::size_t dense_cap = kDefaultDenseCap) {
  std::ifstream in = detail::open_in(path);
  std::string line;
  if (!std::getline(in, line) || line != "mode,step,value") {
    throw ConfigError("target file " + path.string() +
                      " must start with the header 'mode,step,value'");
  }
  struct Row {
    std::size_t mode;
    std::size_t step;
    double value;
  };
  std::vector<Row> rows;
  std::size_t max_mode = 0, max_step = 0, line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream cells(line);
    std::string a, b, c;
    if (!std::getline(cells, a, ',') || !std::getline(cells, b, ',') ||
        !std::getline(cells, c)) {
      throw ConfigError("malformed row in " + path.string() + ":" +
                        std::to_string(line_no));
    }
    Row row;
    row.mode = static_cast<std::size_t>(detail::parse_csv_double(a, path, line_no));
    row.step = static_cast<std::size_t>(detail::parse_csv_double(b, path, line_no));
    row.value = detail::parse_csv_double(c, path, line_no);
    if (row.mode < 1) {
      throw ConfigError("mode index must be >= 1 in " + path.string() + ":" +
                        std::to_string(line_no));
    }
    max_mode = std::max(max_mode, row.mode);
    max_step = std::max(max_step, row.step);
    rows.push_back(row);
  }
  if (rows.empty()) {
    throw ConfigError("target file " + path.string() + " has no data rows");
  }
  ModalField field(max_mode, max_step + 1, dense_cap);
  std::vector<bool> seen(max_mode * (max_step + 1), false);
  for (const Row& row : rows) {
    const std::size_t flat = (row.mode - 1) * (max_step + 1) + row.step;
    if (seen[flat]) {
      throw ConfigError("duplicate (mode,step) = (" + std::to_string(row.mode) + "," +
                        std::to_string(row.step) + ") in " + path.string());
    }
    seen[flat] = true;
    field.at(row.mode, row.step) = row.value;
  }
  if (rows.size() != seen.size()) {
    throw ConfigError("target file " + path.string() + " does not cover the full " +
                      std::to_string(max_mode) + " x " + std::to_string(max_step + 1) +
                      " grid");
  }
  return field;
}

// Initial data file: one coefficient per line, '#' comments and blank lines
// skipped.
inline std::vector<double> read_coefficients(const std::filesystem::path& path) {
  std::ifstream in = detail::open_in(path);
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    values.push_back(
        detail::parse_csv_double(line.substr(first, last - first + 1), path, line_no));
  }
  if (values.empty()) {
    throw ConfigError("coefficient file " + path.string() + " has no values");
  }
  return values;
}

inline void write_trace_csv(const std::filesystem::path& path,
                            const std::vector<Iterate>& trace) {
  std::ofstream out = detail::open_out(path);
  out << "iter,s,J,J1,J2\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out << i << ',' << format_double(trace[i].s) << ',' << format_double(trace[i].J)
        << ',' << format_double(trace[i].J1) << ',' << format_double(trace[i].J2)
        << '\n';
  }
}

// Failed paths keep the row (the path index and seed are real data) with nan
// placeholders for the unavailable statistics.
inline void write_paths_csv(const std::filesystem::path& path,
                            const std::vector<PathResult>& results) {
  std::ofstream out = detail::open_out(path);
  out << "path,seed,s_star,J_star,J1,J2,certified\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const PathResult& r : results) {
    const OptimalityReport& rep = r.report;
    out << r.path_index << ',' << r.seed << ',';
    if (r.ok) {
      out << format_double(rep.s_star) << ',' << format_double(rep.J_star) << ','
          << format_double(rep.necessary_residual) << ','
          << format_double(rep.sufficient_value) << ',' << (rep.certified ? 1 : 0);
    } else {
      out << format_double(nan) << ',' << format_double(nan) << ','
          << format_double(nan) << ',' << format_double(nan) << ",0";
    }
    out << '\n';
  }
}

inline void write_isometry_csv(const std::filesystem::path& path,
                               const IsometryCheck& check) {
  std::ofstream out = detail::open_out(path);
  out << "mode,t,empirical,theoretical\n";
  for (const IsometryEntry& e : check.entries) {
    out << e.mode << ',' << format_double(e.t) << ',' << format_double(e.empirical_var)
        << ',' << format_double(e.closed_form) << '\n';
  }
}

// JSON payload builders. The CLI attaches the shared metadata block; these
// carry only the domain content.

inline nlohmann::json model_json(const SpectralModel& model) {
  nlohmann::json law;
  if (const auto* pl = std::get_if<PowerLawEigenvalues>(&model.eigenvalue_law())) {
    law = {{"type", "power_law"}, {"c", pl->c}, {"q", pl->q}};
  } else {
    law = {{"type", "explicit"},
           {"values", std::get<ExplicitEigenvalues>(model.eigenvalue_law()).values}};
  }
  nlohmann::json cov;
  if (const auto* md = std::get_if<MatchedDecayCovariance>(&model.covariance_law())) {
    cov = {{"type", "matched_decay"}, {"epsilon", md->epsilon}, {"s_ref", md->s_ref}};
  } else if (const auto* pc = std::get_if<PowerLawCovariance>(&model.covariance_law())) {
    cov = {{"type", "power_law"}, {"c0", pc->c0}, {"r", pc->r}};
  } else {
    cov = {{"type", "explicit"},
           {"values", std::get<ExplicitCovariance>(model.covariance_law()).values}};
  }
  return {{"eigenvalue_law", law},
          {"covariance_law", cov},
          {"alpha", model.alpha()},
          {"n_modes", model.n_modes()}};
}

inline nlohmann::json grid_json(const TimeGrid& grid) {
  return {{"t_final", grid.t_final}, {"n_steps", grid.n_steps}};
}

inline nlohmann::json penalty_json(const Penalty& penalty) {
  if (const auto* b = std::get_if<BarrierPenalty>(&penalty)) {
    return {{"type", "barrier"}, {"L", b->L}, {"weight", b->weight}};
  }
  if (const auto* e = std::get_if<ExpOverSPenalty>(&penalty)) {
    return {{"type", "exp_over_s"}, {"weight", e->weight}};
  }
  const auto& c = std::get<CustomPenalty>(penalty);
  return {{"type", "custom"},
          {"s", c.s},
          {"phi", c.phi},
          {"dphi", c.dphi},
          {"d2phi", c.d2phi}};
}

inline nlohmann::json target_json(const TargetField& target) {
  nlohmann::json out;
  switch (target.provenance) {
    case TargetField::Provenance::Constant:
      out["provenance"] = "constant";
      break;
    case TargetField::Provenance::FromSolution:
      out["provenance"] = "from_solution";
      break;
    case TargetField::Provenance::FromFile:
      out["provenance"] = "from_file";
      break;
  }
  if (std::isfinite(target.s_true)) {
    out["s_true"] = target.s_true;
  }
  out["noiseless"] = target.noiseless;
  if (!target.noiseless && target.provenance == TargetField::Provenance::FromSolution) {
    out["seed"] = target.seed;
  }
  out["n_modes"] = target.field.n_modes();
  out["n_nodes"] = target.field.n_nodes();
  return out;
}

inline nlohmann::json report_json(const OptimalityReport& report) {
  return {{"s_star", report.s_star},
          {"J_star", report.J_star},
          {"necessary_residual", report.necessary_residual},
          {"sufficient_value", report.sufficient_value},
          {"certified", report.certified},
          {"on_boundary", report.on_boundary},
          {"bracket", {report.bracket_lo, report.bracket_hi}},
          {"tol", report.tol},
          {"n_iterations", report.n_iterations}};
}

inline nlohmann::json ensemble_json(const EnsembleSummary& summary) {
  nlohmann::json failures = nlohmann::json::array();
  for (const PathResult& r : summary.per_path) {
    if (!r.ok) {
      failures.push_back(
          {{"path", r.path_index}, {"seed", r.seed}, {"error", r.error}});
    }
  }
  return {{"n_paths", summary.n_paths},
          {"n_failed", summary.n_failed},
          {"s_mean", summary.s_mean},
          {"s_std", summary.s_std},
          {"s_quantiles",
           {{"q05", summary.s_quantiles.q05},
            {"q50", summary.s_quantiles.q50},
            {"q95", summary.s_quantiles.q95}}},
          {"J_mean", summary.J_mean},
          {"certified_fraction", summary.certified_fraction},
          {"failures", failures}};
}

inline nlohmann::json isometry_json(const IsometryCheck& check) {
  nlohmann::json entries = nlohmann::json::array();
  for (const IsometryEntry& e : check.entries) {
    entries.push_back({{"mode", e.mode},
                       {"t", e.t},
                       {"empirical_var", e.empirical_var},
                       {"closed_form", e.closed_form},
                       {"z_score", e.z_score},
                       {"pass", e.pass}});
  }
  nlohmann::json totals = nlohmann::json::array();
  for (const UniformBoundEntry& u : check.totals) {
    totals.push_back({{"t", u.t},
                      {"empirical", u.empirical},
                      {"standard_error", u.standard_error},
                      {"bound", u.bound},
                      {"pass", u.pass}});
  }
  return {{"entries", entries}, {"totals", totals}, {"all_pass", check.all_pass}};
}

inline nlohmann::json hs_bound_json(const HsBoundEntry& entry) {
  return {{"t", entry.t},
          {"mean_lhs", entry.mean_lhs},
          {"mean_bound", entry.mean_bound},
          {"mean_pass", entry.mean_pass},
          {"noise_empirical", entry.noise_empirical},
          {"noise_closed_form", entry.noise_closed_form},
          {"noise_z", entry.noise_z},
          {"noise_pass", entry.noise_pass},
          {"pass", entry.pass}};
}

inline nlohmann::json l2_bound_json(const L2BoundEntry& entry) {
  return {{"s", entry.s},
          {"empirical", entry.empirical},
          {"standard_error", entry.standard_error},
          {"exact_value", entry.exact_value},
          {"coarse_bound", entry.coarse_bound},
          {"z_exact", entry.z_exact},
          {"within_exact", entry.within_exact},
          {"within_bound", entry.within_bound},
          {"pass", entry.pass}};
}

inline nlohmann::json holder_json(const HolderEstimate& est) {
  return {{"slope", est.slope},
          {"ci_low", est.ci_low},
          {"ci_high", est.ci_high},
          {"pass", est.pass},
          {"noise_free", est.noise_free},
          {"lag_times", est.lag_times},
          {"median_increments", est.median_increments}};
}

inline nlohmann::json factorization_json(const FactorizationCheck& check) {
  return {{"beta", check.beta}, {"value", check.value}, {"finite", check.finite}};
}

// s_max is serialized as the string "inf" when unbounded; JSON has no
// infinity literal.
inline nlohmann::json admissible_json(const AdmissibleInterval& interval) {
  nlohmann::json out;
  out["s_min"] = interval.s_min;
  if (interval.unbounded()) {
    out["s_max"] = "inf";
  } else {
    out["s_max"] = interval.s_max;
  }
  out["basis"] = (interval.basis == AdmissibleBasis::Analytic) ? "analytic"
                                                               : "numeric_heuristic";
  return out;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  std::ofstream out = detail::open_out(path);
  out << doc.dump(2) << '\n';
}

}  // namespace fracid
