#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fracid/errors.hpp"
#include "fracid/noise.hpp"
#include "fracid/spectrum.hpp"
#include "fracid/state.hpp"

namespace fracid {

// E(s) = e^{-lambda^s u} and its first two s-derivatives. With a = lambda^s
// and l = ln lambda:
//   E'  = -a l u E
//   E'' = (a^2 u^2 - a u) l^2 E
// At u = 0 the kernel is identically 1, so both derivatives vanish.
struct KernelDerivatives {
  double value;
  double d1;
  double d2;
};

inline KernelDerivatives kernel_derivatives(double lambda, double u, double s) {
  if (!(lambda > 0.0)) {
    throw DomainError("kernel_derivatives requires lambda > 0");
  }
  if (!(s > 0.0)) {
    throw DomainError("kernel_derivatives requires s > 0");
  }
  if (!(u >= 0.0)) {
    throw DomainError("kernel_derivatives requires u >= 0");
  }
  if (u == 0.0) {
    return {1.0, 0.0, 0.0};
  }
  const double a = std::pow(lambda, s);
  const double l = std::log(lambda);
  const double value = std::exp(-a * u);
  const double au = a * u;
  const double d1 = -au * l * value;
  const double d2 = (au * au - au) * l * l * value;
  return {value, d1, d2};
}

// Frozen uniform bounds |d^k E / ds^k| <= C_k s^{-k} (1 + |ln u|^k) on
// lambda >= 1, u > 0. Fitted on a reference sweep (lambda log-spaced in
// [1, 1e4], u log-spaced in [1e-8, 10], s in [0.05, 5]) and rounded up;
// the analytic suprema are ~0.368 (k=1) and ~0.681 (k=2).
inline constexpr double kMajorantC1 = 0.40;
inline constexpr double kMajorantC2 = 0.75;

struct MajorantCheck {
  bool holds;
  double lhs;       // |d^k E/ds^k| at the sample point
  double bound;     // C_k s^{-k} (1 + |ln u|^k)
  double constant;  // the frozen C_k
};

// Only the orders that the optimizer consumes carry a frozen constant.
inline MajorantCheck majorant_check(double lambda, double u, double s, int k) {
  if (k != 1 && k != 2) {
    throw ArgumentError("majorant bound is frozen for derivative orders 1 and 2 only");
  }
  if (!(lambda >= 1.0)) {
    throw DomainError("majorant bound assumes lambda >= 1");
  }
  if (!(u > 0.0)) {
    throw DomainError("majorant bound assumes u > 0");
  }
  const KernelDerivatives kd = kernel_derivatives(lambda, u, s);
  const double lhs = std::abs(k == 1 ? kd.d1 : kd.d2);
  const double c = (k == 1) ? kMajorantC1 : kMajorantC2;
  const double lg = std::abs(std::log(u));
  const double bound = c * std::pow(s, -k) * (1.0 + std::pow(lg, k));
  return {lhs <= bound, lhs, bound, c};
}

// d/ds and d^2/ds^2 of the deterministic part y0 e^{-lambda^s t}.
inline double sensitivity_mean_mode(double y0j, double lambda, double s, double t,
                                    int order) {
  if (order != 1 && order != 2) {
    throw ArgumentError("sensitivity order must be 1 or 2");
  }
  const KernelDerivatives kd = kernel_derivatives(lambda, t, s);
  return y0j * (order == 1 ? kd.d1 : kd.d2);
}

namespace detail {

// Shared one-pass recursion for the convolution and its s-derivatives.
// Differentiating the frozen left-point sum
//   w[n] = sqrt(mu) sum_m e^{-a (t_n - t_m)} dB_m
// in s brings down powers of (t_n - t_m) ln(lambda):
//   d1 w[n] = -a l sqrt(mu) S1[n]
//   d2 w[n] = l^2 sqrt(mu) (a^2 S2[n] - a S1[n])
// with the weighted sums S_p[n] = sum_m (t_n - t_m)^p e^{-a (t_n - t_m)} dB_m,
// which obey the shift recursions below (each step adds dt to every elapsed
// time, binomially re-expanding the power).
struct ConvolutionDerivRows {
  std::vector<double> value;
  std::vector<double> d1;
  std::vector<double> d2;
};

inline ConvolutionDerivRows convolution_with_derivatives(
    const BrownianLattice& lattice, std::size_t j, double mu, double lambda,
    double s) {
  if (!(mu >= 0.0)) {
    throw DomainError("convolution derivatives require mu >= 0");
  }
  const double a = std::pow(lambda, s);
  const double l = std::log(lambda);
  const double dt = lattice.grid().dt();
  const double decay = std::exp(-a * dt);
  const double amp = std::sqrt(mu);
  const auto db = lattice.mode_increments(j);

  ConvolutionDerivRows rows;
  const std::size_t nodes = lattice.grid().n_nodes();
  rows.value.assign(nodes, 0.0);
  rows.d1.assign(nodes, 0.0);
  rows.d2.assign(nodes, 0.0);

  double s0 = 0.0, s1 = 0.0, s2 = 0.0;
  for (std::size_t n = 0; n < db.size(); ++n) {
    const double fresh = db[n];
    const double next2 = decay * (s2 + 2.0 * dt * s1 + dt * dt * (s0 + fresh));
    const double next1 = decay * (s1 + dt * (s0 + fresh));
    const double next0 = decay * (s0 + fresh);
    s2 = next2;
    s1 = next1;
    s0 = next0;
    rows.value[n + 1] = amp * s0;
    rows.d1[n + 1] = -a * l * amp * s1;
    rows.d2[n + 1] = l * l * amp * (a * a * s2 - a * s1);
  }
  return rows;
}

}  // namespace detail

// Pathwise s-derivative of the convolution part of one mode on the lattice's
// grid. Exact derivative of the discretized sum, not a discretization of the
// continuous derivative, so finite differences of convolution_mode in s
// reproduce it to quadrature-free accuracy.
inline std::vector<double> sensitivity_conv_mode(const BrownianLattice& lattice,
                                                 std::size_t j, double mu,
                                                 double lambda, double s, int order) {
  if (order != 1 && order != 2) {
    throw ArgumentError("sensitivity order must be 1 or 2");
  }
  auto rows = detail::convolution_with_derivatives(lattice, j, mu, lambda, s);
  return order == 1 ? std::move(rows.d1) : std::move(rows.d2);
}

// First and second pathwise s-derivatives of the full modal solution,
// tied to the same lattice seed and exponent as the solution they belong to.
class SensitivitySolution {
 public:
  SensitivitySolution(double s, const TimeGrid& grid, std::uint64_t seed,
                      ModalField d1_mean, ModalField d1_conv, ModalField d2_mean,
                      ModalField d2_conv)
      : s_(s),
        grid_(grid),
        seed_(seed),
        d1_mean_(std::move(d1_mean)),
        d1_conv_(std::move(d1_conv)),
        d2_mean_(std::move(d2_mean)),
        d2_conv_(std::move(d2_conv)) {
    if (!d1_mean_.same_shape(d1_conv_) || !d1_mean_.same_shape(d2_mean_) ||
        !d1_mean_.same_shape(d2_conv_)) {
      throw ShapeError("sensitivity parts must share a shape");
    }
    if (d1_mean_.n_nodes() != grid.n_nodes()) {
      throw ShapeError("sensitivity node count does not match the grid");
    }
  }

  double s() const { return s_; }
  const TimeGrid& grid() const { return grid_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t n_modes() const { return d1_mean_.n_modes(); }

  const ModalField& d1_mean() const { return d1_mean_; }
  const ModalField& d1_convolution() const { return d1_conv_; }
  const ModalField& d2_mean() const { return d2_mean_; }
  const ModalField& d2_convolution() const { return d2_conv_; }

  double d1(std::size_t j, std::size_t n) const {
    return d1_mean_.at(j, n) + d1_conv_.at(j, n);
  }

  double d2(std::size_t j, std::size_t n) const {
    return d2_mean_.at(j, n) + d2_conv_.at(j, n);
  }

 private:
  double s_;
  TimeGrid grid_;
  std::uint64_t seed_;
  ModalField d1_mean_;
  ModalField d1_conv_;
  ModalField d2_mean_;
  ModalField d2_conv_;
};

inline SensitivitySolution assemble_sensitivities(const SpectralModel& model,
                                                  const InitialData& y0,
                                                  const BrownianLattice& lattice,
                                                  double s,
                                                  std::size_t dense_cap = kDefaultDenseCap) {
  if (!(s > 0.0)) {
    throw DomainError("assemble_sensitivities requires s > 0");
  }
  if (y0.coeffs.size() != model.n_modes()) {
    throw ShapeError("initial data has " + std::to_string(y0.coeffs.size()) +
                     " coefficients, model has " + std::to_string(model.n_modes()) +
                     " modes");
  }
  if (lattice.n_modes() != model.n_modes()) {
    throw ShapeError("lattice mode count does not match the model");
  }

  const TimeGrid& grid = lattice.grid();
  ModalField d1m(model.n_modes(), grid.n_nodes(), dense_cap);
  ModalField d1c(model.n_modes(), grid.n_nodes(), dense_cap);
  ModalField d2m(model.n_modes(), grid.n_nodes(), dense_cap);
  ModalField d2c(model.n_modes(), grid.n_nodes(), dense_cap);

  for (std::size_t j = 1; j <= model.n_modes(); ++j) {
    const double lambda = model.eigenvalue(j);
    const double y0j = y0.coeff(j);
    auto r1m = d1m.row(j);
    auto r2m = d2m.row(j);
    for (std::size_t n = 0; n < grid.n_nodes(); ++n) {
      const KernelDerivatives kd = kernel_derivatives(lambda, grid.time(n), s);
      r1m[n] = y0j * kd.d1;
      r2m[n] = y0j * kd.d2;
    }
    const auto rows = detail::convolution_with_derivatives(
        lattice, j, model.covariance_eigenvalue(j), lambda, s);
    auto r1c = d1c.row(j);
    auto r2c = d2c.row(j);
    for (std::size_t n = 0; n < grid.n_nodes(); ++n) {
      r1c[n] = rows.d1[n];
      r2c[n] = rows.d2[n];
    }
  }
  return SensitivitySolution(s, grid, lattice.seed(), std::move(d1m), std::move(d1c),
                             std::move(d2m), std::move(d2c));
}

}  // namespace fracid
