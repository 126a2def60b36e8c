#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "fracid/errors.hpp"
#include "fracid/noise.hpp"
#include "fracid/spectrum.hpp"
#include "fracid/state.hpp"
#include "fracid/sensitivity.hpp"

namespace fracid {

// Phi(s) = weight / (s (L - s)) on (0, L): blows up at both ends, convex,
// stationary at L/2.
struct BarrierPenalty {
  double L = 2.0;
  double weight = 1.0;
};

// Phi(s) = weight * e^s / s on (0, inf): the classic coercive choice, strictly
// convex with its minimum at s = 1.
struct ExpOverSPenalty {
  double weight = 1.0;
};

// Tabulated (s, Phi, Phi', Phi'') on an ascending grid. Callers must supply
// the derivatives; nothing is differentiated numerically here. Values are
// interpolated per column with cubic Hermite pieces (Phi with slopes Phi',
// Phi' with slopes Phi''; Phi'' linearly), which reproduces polynomial
// tables up to cubics exactly.
struct CustomPenalty {
  std::vector<double> s;
  std::vector<double> phi;
  std::vector<double> dphi;
  std::vector<double> d2phi;
};

using Penalty = std::variant<BarrierPenalty, ExpOverSPenalty, CustomPenalty>;

struct PenaltyEval {
  double value;
  double d1;
  double d2;
};

namespace detail {

inline void validate_custom(const CustomPenalty& p) {
  const std::size_t n = p.s.size();
  if (n < 2) {
    throw ConfigError("custom penalty table needs at least two points");
  }
  if (p.phi.size() != n || p.dphi.size() != n || p.d2phi.size() != n) {
    throw ConfigError("custom penalty columns must have equal length");
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (!(p.s[i] > p.s[i - 1])) {
      throw ConfigError("custom penalty abscissae must be strictly ascending");
    }
  }
}

// Cubic Hermite on [x0, x1] from endpoint values and slopes.
inline double hermite(double x, double x0, double x1, double f0, double f1,
                      double g0, double g1) {
  const double h = x1 - x0;
  const double t = (x - x0) / h;
  const double t2 = t * t;
  const double t3 = t2 * t;
  return (2.0 * t3 - 3.0 * t2 + 1.0) * f0 + (t3 - 2.0 * t2 + t) * h * g0 +
         (-2.0 * t3 + 3.0 * t2) * f1 + (t3 - t2) * h * g1;
}

inline PenaltyEval eval_custom(const CustomPenalty& p, double s) {
  validate_custom(p);
  if (s < p.s.front() || s > p.s.back()) {
    throw DomainError("s = " + std::to_string(s) + " outside the custom penalty table [" +
                      std::to_string(p.s.front()) + ", " + std::to_string(p.s.back()) + "]");
  }
  std::size_t i = 0;
  while (i + 2 < p.s.size() && s >= p.s[i + 1]) ++i;
  const double x0 = p.s[i], x1 = p.s[i + 1];
  const double t = (s - x0) / (x1 - x0);
  PenaltyEval out;
  out.value = hermite(s, x0, x1, p.phi[i], p.phi[i + 1], p.dphi[i], p.dphi[i + 1]);
  out.d1 = hermite(s, x0, x1, p.dphi[i], p.dphi[i + 1], p.d2phi[i], p.d2phi[i + 1]);
  out.d2 = (1.0 - t) * p.d2phi[i] + t * p.d2phi[i + 1];
  return out;
}

}  // namespace detail

// Penalty value with its first two derivatives. Barrier and ExpOverS are
// evaluated in closed form; outside their open domains the evaluation is a
// domain error rather than an infinity.
inline PenaltyEval penalty_eval(const Penalty& penalty, double s) {
  if (const auto* b = std::get_if<BarrierPenalty>(&penalty)) {
    if (!(b->L > 0.0) || !(b->weight > 0.0)) {
      throw ConfigError("barrier penalty needs L > 0 and weight > 0");
    }
    if (!(s > 0.0) || !(s < b->L)) {
      throw DomainError("s = " + std::to_string(s) + " outside the barrier domain (0, " +
                        std::to_string(b->L) + ")");
    }
    const double w = b->weight;
    const double g = s * (b->L - s);      // g' = L - 2s, g'' = -2
    const double gp = b->L - 2.0 * s;
    PenaltyEval out;
    out.value = w / g;
    out.d1 = -w * gp / (g * g);
    out.d2 = w * (2.0 * gp * gp + 2.0 * g) / (g * g * g);
    return out;
  }
  if (const auto* e = std::get_if<ExpOverSPenalty>(&penalty)) {
    if (!(e->weight > 0.0)) {
      throw ConfigError("exp-over-s penalty needs weight > 0");
    }
    if (!(s > 0.0)) {
      throw DomainError("s = " + std::to_string(s) + " outside the exp-over-s domain (0, inf)");
    }
    const double w = e->weight;
    const double es = std::exp(s);
    PenaltyEval out;
    out.value = w * es / s;
    out.d1 = w * es * (s - 1.0) / (s * s);
    out.d2 = w * es * (s * s - 2.0 * s + 2.0) / (s * s * s);
    return out;
  }
  return detail::eval_custom(std::get<CustomPenalty>(penalty), s);
}

// Open domain of a penalty as (lo, hi); hi is +inf for ExpOverS. Custom
// tables are closed intervals, reported with their endpoints.
inline std::pair<double, double> penalty_domain(const Penalty& penalty) {
  if (const auto* b = std::get_if<BarrierPenalty>(&penalty)) {
    return {0.0, b->L};
  }
  if (std::holds_alternative<ExpOverSPenalty>(penalty)) {
    return {0.0, std::numeric_limits<double>::infinity()};
  }
  const auto& c = std::get<CustomPenalty>(penalty);
  detail::validate_custom(c);
  return {c.s.front(), c.s.back()};
}

// Reference field the misfit is measured against, with a record of where it
// came from so outputs can state what was being identified.
struct TargetField {
  enum class Provenance { Constant, FromSolution, FromFile };

  ModalField field;
  Provenance provenance = Provenance::FromFile;
  double s_true = std::numeric_limits<double>::quiet_NaN();
  bool noiseless = false;
  std::uint64_t seed = 0;
};

// Target manufactured from the model itself at a known exponent: either the
// deterministic mean path (noiseless) or a full pathwise solve on an
// independently seeded lattice.
inline TargetField target_from_solution(const SpectralModel& model,
                                        const InitialData& y0, const TimeGrid& grid,
                                        double s_true,
                                        std::optional<std::uint64_t> seed,
                                        std::size_t dense_cap = kDefaultDenseCap) {
  if (!(s_true > 0.0)) {
    throw DomainError("target_from_solution requires s_true > 0");
  }
  if (y0.coeffs.size() != model.n_modes()) {
    throw ShapeError("initial data does not match the model mode count");
  }
  TargetField target;
  target.provenance = TargetField::Provenance::FromSolution;
  target.s_true = s_true;
  if (!seed.has_value()) {
    target.noiseless = true;
    target.field = ModalField(model.n_modes(), grid.n_nodes(), dense_cap);
    for (std::size_t j = 1; j <= model.n_modes(); ++j) {
      const double a = model.fractional_power(j, s_true);
      const double y0j = y0.coeff(j);
      auto row = target.field.row(j);
      for (std::size_t n = 0; n < grid.n_nodes(); ++n) {
        row[n] = y0j * std::exp(-a * grid.time(n));
      }
    }
    return target;
  }
  target.noiseless = false;
  target.seed = *seed;
  const BrownianLattice lattice(*seed, model.n_modes(), grid);
  const ModalSolution sol = solve_path(model, y0, lattice, s_true, dense_cap);
  target.field = ModalField(model.n_modes(), grid.n_nodes(), dense_cap);
  for (std::size_t j = 1; j <= model.n_modes(); ++j) {
    auto row = target.field.row(j);
    for (std::size_t n = 0; n < grid.n_nodes(); ++n) {
      row[n] = sol.value(j, n);
    }
  }
  return target;
}

// Every modal coefficient pinned to the same value at every node.
inline TargetField target_constant(std::size_t n_modes, const TimeGrid& grid,
                                   double value,
                                   std::size_t dense_cap = kDefaultDenseCap) {
  TargetField target;
  target.provenance = TargetField::Provenance::Constant;
  target.field = ModalField(n_modes, grid.n_nodes(), dense_cap);
  for (std::size_t j = 1; j <= n_modes; ++j) {
    auto row = target.field.row(j);
    for (std::size_t n = 0; n < grid.n_nodes(); ++n) {
      row[n] = value;
    }
  }
  return target;
}

// One evaluation of the pathwise cost at a fixed exponent. J1 and J2 are
// zero unless produced by cost_derivatives.
struct CostEvaluation {
  double s = 0.0;
  double J = 0.0;
  double J1 = 0.0;
  double J2 = 0.0;
  double misfit = 0.0;
  double penalty = 0.0;
};

namespace detail {

// Trapezoid rule over the solution grid.
inline double trapezoid(const std::vector<double>& f, double dt) {
  double sum = 0.5 * (f.front() + f.back());
  for (std::size_t n = 1; n + 1 < f.size(); ++n) sum += f[n];
  return dt * sum;
}

inline void check_target_shape(const ModalSolution& solution, const TargetField& target) {
  if (target.field.n_modes() != solution.n_modes() ||
      target.field.n_nodes() != solution.grid().n_nodes()) {
    throw ShapeError("target field shape does not match the solution");
  }
}

}  // namespace detail

// J(s) = int_0^T ||y(t) - yD(t)||^2 dt + Phi(s), trapezoid in time.
inline CostEvaluation cost(const ModalSolution& solution, const TargetField& target,
                           const Penalty& penalty) {
  detail::check_target_shape(solution, target);
  const TimeGrid& grid = solution.grid();
  std::vector<double> density(grid.n_nodes());
  for (std::size_t n = 0; n < grid.n_nodes(); ++n) {
    density[n] = field_misfit_density(solution, target.field, n);
  }
  const PenaltyEval pe = penalty_eval(penalty, solution.s());
  CostEvaluation out;
  out.s = solution.s();
  out.misfit = detail::trapezoid(density, grid.dt());
  out.penalty = pe.value;
  out.J = out.misfit + out.penalty;
  if (!std::isfinite(out.J)) {
    throw NumericError("cost is not finite at s = " + std::to_string(out.s));
  }
  return out;
}

// Cost with its first two s-derivatives on the same noise path:
//   J1 = 2 int <y - yD, y'> dt + Phi'
//   J2 = 2 int ( ||y'||^2 + <y - yD, y''> ) dt + Phi''
// The factor 2 comes from differentiating the squared misfit.
inline CostEvaluation cost_derivatives(const ModalSolution& solution,
                                       const SensitivitySolution& sensitivities,
                                       const TargetField& target,
                                       const Penalty& penalty) {
  detail::check_target_shape(solution, target);
  if (solution.s() != sensitivities.s()) {
    throw ShapeError("solution and sensitivities evaluated at different exponents");
  }
  if (solution.seed() != sensitivities.seed()) {
    throw ShapeError("solution and sensitivities built from different noise paths");
  }
  if (!(solution.grid() == sensitivities.grid()) ||
      solution.n_modes() != sensitivities.n_modes()) {
    throw ShapeError("solution and sensitivities shapes do not match");
  }

  const TimeGrid& grid = solution.grid();
  std::vector<double> density(grid.n_nodes());
  std::vector<double> first(grid.n_nodes());
  std::vector<double> second(grid.n_nodes());
  for (std::size_t n = 0; n < grid.n_nodes(); ++n) {
    double f0 = 0.0, f1 = 0.0, f2 = 0.0;
    for (std::size_t j = 1; j <= solution.n_modes(); ++j) {
      const double diff = solution.value(j, n) - target.field.at(j, n);
      const double dy = sensitivities.d1(j, n);
      const double ddy = sensitivities.d2(j, n);
      f0 += diff * diff;
      f1 += diff * dy;
      f2 += dy * dy + diff * ddy;
    }
    density[n] = f0;
    first[n] = f1;
    second[n] = f2;
  }
  const PenaltyEval pe = penalty_eval(penalty, solution.s());
  CostEvaluation out;
  out.s = solution.s();
  out.misfit = detail::trapezoid(density, grid.dt());
  out.penalty = pe.value;
  out.J = out.misfit + out.penalty;
  out.J1 = 2.0 * detail::trapezoid(first, grid.dt()) + pe.d1;
  out.J2 = 2.0 * detail::trapezoid(second, grid.dt()) + pe.d2;
  if (!std::isfinite(out.J) || !std::isfinite(out.J1) || !std::isfinite(out.J2)) {
    throw NumericError("cost derivatives are not finite at s = " + std::to_string(out.s));
  }
  return out;
}

}  // namespace fracid
