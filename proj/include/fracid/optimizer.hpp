#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "fracid/errors.hpp"
#include "fracid/objective.hpp"

namespace fracid {

struct OptimizerConfig {
  double s_lo = 0.1;
  double s_hi = 1.9;
  int grid_points = 33;
  double newton_tol = 1e-8;
  int max_newton_iters = 50;
  bool bisection_fallback = true;

  void validate() const {
    if (!(s_lo > 0.0) || !(s_hi > s_lo)) {
      throw ConfigError("optimizer needs 0 < s_lo < s_hi");
    }
    if (grid_points < 8) {
      throw ConfigError("optimizer grid needs at least 8 points");
    }
    if (!(newton_tol > 0.0)) {
      throw ConfigError("newton_tol must be positive");
    }
    if (max_newton_iters < 1) {
      throw ConfigError("max_newton_iters must be at least 1");
    }
  }
};

// One recorded evaluation of the cost (derivatives zero when only J was
// computed, e.g. during the grid scan).
struct Iterate {
  double s;
  double J;
  double J1;
  double J2;
};

// Evaluators the optimizer drives. Both take s and return a CostEvaluation;
// the scan variant may leave J1/J2 zero, the refine variant must fill them.
using CostFn = std::function<CostEvaluation(double)>;

struct GridScanResult {
  double s_best;
  double J_best;
  double bracket_lo;
  double bracket_hi;
  std::vector<Iterate> evaluations;
};

// Coarse global stage: evaluate J on an equispaced grid over [s_lo, s_hi],
// keep the smallest value (ties break to the smaller s) and bracket it with
// its grid neighbours. Evaluations that throw a numeric error or return a
// non-finite J are skipped; if nothing survives the scan fails.
inline GridScanResult grid_scan(const CostFn& eval_cost, const OptimizerConfig& config) {
  config.validate();
  GridScanResult out;
  const int n = config.grid_points;
  std::vector<double> grid(n);
  for (int i = 0; i < n; ++i) {
    grid[i] = config.s_lo +
              (config.s_hi - config.s_lo) * static_cast<double>(i) / (n - 1);
  }
  grid.back() = config.s_hi;

  int best = -1;
  double best_J = std::numeric_limits<double>::infinity();
  std::vector<bool> usable(n, false);
  for (int i = 0; i < n; ++i) {
    CostEvaluation e;
    try {
      e = eval_cost(grid[i]);
    } catch (const NumericError&) {
      continue;
    }
    if (!std::isfinite(e.J)) continue;
    usable[i] = true;
    out.evaluations.push_back({grid[i], e.J, e.J1, e.J2});
    if (e.J < best_J) {
      best_J = e.J;
      best = i;
    }
  }
  if (best < 0) {
    throw OptimizationError("grid scan found no finite cost value in [" +
                            std::to_string(config.s_lo) + ", " +
                            std::to_string(config.s_hi) + "]");
  }
  out.s_best = grid[best];
  out.J_best = best_J;
  int lo = best, hi = best;
  while (lo > 0 && !usable[lo - 1]) --lo;
  while (hi + 1 < n && !usable[hi + 1]) ++hi;
  out.bracket_lo = (lo > 0) ? grid[lo - 1] : grid[best];
  out.bracket_hi = (hi + 1 < n) ? grid[hi + 1] : grid[best];
  if (out.bracket_lo == out.bracket_hi) {
    throw OptimizationError("grid scan could not bracket a minimizer");
  }
  return out;
}

struct OptimalityReport {
  double s_star = 0.0;
  double J_star = 0.0;
  double necessary_residual = 0.0;  // J1 at s_star
  double sufficient_value = 0.0;    // J2 at s_star
  bool certified = false;           // |J1| <= tol and J2 > 0
  bool on_boundary = false;         // pinned at s_lo or s_hi
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  double tol = 0.0;
  std::size_t n_iterations = 0;
  std::vector<Iterate> trace;
};

namespace detail {

inline bool near(double a, double b) {
  return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace detail

// Safeguarded Newton on the stationarity condition J1 = 0. A Newton step is
// taken only while J2 > 0 and the step stays inside the current bracket;
// otherwise the method bisects (when the bracket straddles a sign change of
// J1) or walks toward the cheaper bracket end. Every iterate stays within
// [bracket_lo, bracket_hi] and hence within the configured [s_lo, s_hi].
inline OptimalityReport newton_refine(const CostFn& eval_with_derivs, double start,
                                      double bracket_lo, double bracket_hi,
                                      const OptimizerConfig& config) {
  config.validate();
  if (bracket_hi < bracket_lo) std::swap(bracket_lo, bracket_hi);
  if (!(bracket_lo >= config.s_lo) || !(bracket_hi <= config.s_hi)) {
    throw ArgumentError("bracket must lie inside [s_lo, s_hi]");
  }
  if (!(start >= bracket_lo) || !(start <= bracket_hi)) {
    throw ArgumentError("newton_refine start must lie inside the bracket");
  }

  OptimalityReport report;
  report.tol = config.newton_tol;
  report.bracket_lo = bracket_lo;
  report.bracket_hi = bracket_hi;

  auto eval_checked = [&](double s) {
    CostEvaluation e = eval_with_derivs(s);
    if (!std::isfinite(e.J) || !std::isfinite(e.J1) || !std::isfinite(e.J2)) {
      throw OptimizationError("non-finite cost derivatives at s = " + std::to_string(s));
    }
    report.trace.push_back({s, e.J, e.J1, e.J2});
    return e;
  };

  auto finish = [&](double s, const CostEvaluation& e) {
    report.s_star = s;
    report.J_star = e.J;
    report.necessary_residual = e.J1;
    report.sufficient_value = e.J2;
    report.certified = std::abs(e.J1) <= config.newton_tol && e.J2 > 0.0;
    report.on_boundary = detail::near(s, config.s_lo) || detail::near(s, config.s_hi);
    return report;
  };

  CostEvaluation elo = eval_checked(bracket_lo);
  CostEvaluation ehi = eval_checked(bracket_hi);
  double lo = bracket_lo, hi = bracket_hi;
  double glo = elo.J1, ghi = ehi.J1;
  // J1 changing sign from <=0 to >=0 across the bracket pins an interior
  // stationary point and makes bisection a safe fallback.
  bool sign_change = (glo <= 0.0 && ghi >= 0.0);

  double s = start;
  CostEvaluation e{};
  for (int it = 0; it < config.max_newton_iters; ++it) {
    e = eval_checked(s);
    ++report.n_iterations;
    if (std::abs(e.J1) <= config.newton_tol) {
      return finish(s, e);
    }
    if (sign_change) {
      if (e.J1 > 0.0) {
        hi = s;
        ghi = e.J1;
      } else {
        lo = s;
        glo = e.J1;
      }
    }
    double next = std::numeric_limits<double>::quiet_NaN();
    if (e.J2 > 0.0) {
      const double candidate = s - e.J1 / e.J2;
      if (std::isfinite(candidate) && candidate >= lo && candidate <= hi) {
        next = candidate;
      }
    }
    if (std::isnan(next)) {
      if (!config.bisection_fallback) {
        return finish(s, e);
      }
      if (sign_change) {
        next = 0.5 * (lo + hi);
      } else {
        // No stationary point inside: walk toward the cheaper end and stop
        // there (boundary-pinned, reported uncertified unless J1 vanishes).
        const double target = (elo.J <= ehi.J) ? bracket_lo : bracket_hi;
        if (detail::near(s, target)) {
          return finish(target, e);
        }
        next = 0.5 * (s + target);
        if (detail::near(next, target)) next = target;
      }
    }
    if (detail::near(next, s)) {
      return finish(s, e);
    }
    s = next;
  }
  // Iteration budget exhausted: report the last evaluation, uncertified
  // unless it happened to satisfy both conditions.
  e = eval_checked(s);
  ++report.n_iterations;
  return finish(s, e);
}

// Re-evaluate the optimality conditions at the reported point: stationarity
// |J1| <= tol (necessary) and J2 > 0 (sufficient for a strict local
// minimizer). A saddle or maximum fails certification even when J1 vanishes.
inline OptimalityReport certify(OptimalityReport report, const CostFn& eval_with_derivs) {
  const CostEvaluation e = eval_with_derivs(report.s_star);
  report.J_star = e.J;
  report.necessary_residual = e.J1;
  report.sufficient_value = e.J2;
  report.certified = std::isfinite(e.J1) && std::isfinite(e.J2) &&
                     std::abs(e.J1) <= report.tol && e.J2 > 0.0;
  return report;
}

// Full pathwise identification: scan, refine, certify. The scan evaluator
// may be cheaper (no derivatives needed).
inline OptimalityReport optimize(const CostFn& eval_cost, const CostFn& eval_with_derivs,
                                 const OptimizerConfig& config) {
  const GridScanResult scan = grid_scan(eval_cost, config);
  OptimalityReport report = newton_refine(eval_with_derivs, scan.s_best,
                                          scan.bracket_lo, scan.bracket_hi, config);
  return certify(std::move(report), eval_with_derivs);
}

}  // namespace fracid
