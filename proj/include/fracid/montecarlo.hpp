#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "fracid/errors.hpp"
#include "fracid/noise.hpp"
#include "fracid/objective.hpp"
#include "fracid/optimizer.hpp"
#include "fracid/sensitivity.hpp"
#include "fracid/state.hpp"
#include "fracid/stats.hpp"

namespace fracid {

struct EnsembleConfig {
  std::size_t n_paths = 0;
  std::uint64_t master_seed = 0;

  void validate() const {
    if (n_paths == 0) {
      throw ConfigError("ensemble needs at least one path");
    }
  }
};

// Outcome of one pathwise identification. Failed paths keep their error
// message and are excluded from the summary statistics but still counted.
struct PathResult {
  std::size_t path_index = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  OptimalityReport report;
  std::string error;
};

struct Quantiles {
  double q05 = 0.0;
  double q50 = 0.0;
  double q95 = 0.0;
};

struct EnsembleSummary {
  std::size_t n_paths = 0;
  std::size_t n_failed = 0;
  double s_mean = 0.0;
  double s_std = 0.0;
  Quantiles s_quantiles;
  double J_mean = 0.0;
  double certified_fraction = 0.0;
  std::vector<PathResult> per_path;
};

// Identification of one noise realization: fresh lattice from the path seed,
// then scan/refine/certify over the shared-noise cost. The scan stage skips
// the sensitivity solve since it only needs J.
inline OptimalityReport solve_single_path(const SpectralModel& model,
                                          const InitialData& y0, const TimeGrid& grid,
                                          const TargetField& target,
                                          const Penalty& penalty,
                                          const OptimizerConfig& opt_config,
                                          std::uint64_t seed,
                                          std::size_t dense_cap = kDefaultDenseCap) {
  const BrownianLattice lattice(seed, model.n_modes(), grid);
  const CostFn scan_cost = [&](double s) {
    return cost(solve_path(model, y0, lattice, s, dense_cap), target, penalty);
  };
  const CostFn deriv_cost = [&](double s) {
    const ModalSolution sol = solve_path(model, y0, lattice, s, dense_cap);
    const SensitivitySolution sens =
        assemble_sensitivities(model, y0, lattice, s, dense_cap);
    return cost_derivatives(sol, sens, target, penalty);
  };
  return optimize(scan_cost, deriv_cost, opt_config);
}

// Reduce per-path outcomes in path order. Statistics cover successful paths
// only; an ensemble with no successes is an error.
inline EnsembleSummary summarize(std::vector<PathResult> results) {
  EnsembleSummary summary;
  summary.n_paths = results.size();
  std::vector<double> s_values;
  double s_sum = 0.0, J_sum = 0.0;
  std::size_t certified = 0;
  for (const PathResult& r : results) {
    if (!r.ok) {
      ++summary.n_failed;
      continue;
    }
    s_values.push_back(r.report.s_star);
    s_sum += r.report.s_star;
    J_sum += r.report.J_star;
    if (r.report.certified) ++certified;
  }
  if (s_values.empty()) {
    throw EmptyEnsembleError("all " + std::to_string(results.size()) +
                             " ensemble paths failed");
  }
  const double n = static_cast<double>(s_values.size());
  summary.s_mean = s_sum / n;
  double sq = 0.0;
  for (double s : s_values) {
    const double d = s - summary.s_mean;
    sq += d * d;
  }
  summary.s_std = (s_values.size() > 1) ? std::sqrt(sq / (n - 1.0)) : 0.0;
  std::sort(s_values.begin(), s_values.end());
  summary.s_quantiles.q05 = detail::quantile_sorted(s_values, 0.05);
  summary.s_quantiles.q50 = detail::quantile_sorted(s_values, 0.50);
  summary.s_quantiles.q95 = detail::quantile_sorted(s_values, 0.95);
  summary.J_mean = J_sum / n;
  summary.certified_fraction = static_cast<double>(certified) / n;
  summary.per_path = std::move(results);
  return summary;
}

// Run n_paths independent identifications with deterministic per-path seeds.
// Threading only partitions the index space; every path is a pure function
// of its seed, so the summary is identical for any thread count.
inline EnsembleSummary run_ensemble(
    const std::function<OptimalityReport(std::uint64_t seed)>& path_solver,
    const EnsembleConfig& config, unsigned n_threads = 1) {
  config.validate();
  std::vector<PathResult> results(config.n_paths);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= config.n_paths) return;
      PathResult& r = results[i];
      r.path_index = i;
      r.seed = path_seed(config.master_seed, i);
      try {
        r.report = path_solver(r.seed);
        r.ok = true;
      } catch (const std::exception& ex) {
        r.ok = false;
        r.error = ex.what();
      }
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(n_threads, config.n_paths));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (unsigned t = 0; t + 1 < workers; ++t) pool.emplace_back(worker);
    worker();
    for (std::thread& th : pool) th.join();
  }
  return summarize(std::move(results));
}

inline EnsembleSummary run_ensemble(const SpectralModel& model, const InitialData& y0,
                                    const TimeGrid& grid, const TargetField& target,
                                    const Penalty& penalty,
                                    const OptimizerConfig& opt_config,
                                    const EnsembleConfig& config, unsigned n_threads = 1,
                                    std::size_t dense_cap = kDefaultDenseCap) {
  return run_ensemble(
      [&](std::uint64_t seed) {
        return solve_single_path(model, y0, grid, target, penalty, opt_config, seed,
                                 dense_cap);
      },
      config, n_threads);
}

}  // namespace fracid
