#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fracid/errors.hpp"
#include "fracid/noise.hpp"
#include "fracid/spectrum.hpp"
#include "fracid/warnings.hpp"

namespace fracid {

// Dense allocations are refused above this many entries unless the caller
// raises the cap explicitly (config field dense_cap).
inline constexpr std::size_t kDefaultDenseCap = 10'000'000;

// Row-major matrix of modal coefficients over the grid nodes: entry (j, n)
// is the j-th coefficient at time t_n. Modes 1-based, nodes 0-based.
class ModalField {
 public:
  ModalField() = default;

  ModalField(std::size_t n_modes, std::size_t n_nodes,
             std::size_t cap = kDefaultDenseCap)
      : n_modes_(n_modes), n_nodes_(n_nodes) {
    if (n_modes_ == 0 || n_nodes_ == 0) {
      throw ShapeError("modal field needs at least one mode and one node");
    }
    if (n_modes_ > cap / n_nodes_) {
      throw CapacityError("dense field of " + std::to_string(n_modes_) + " x " +
                          std::to_string(n_nodes_) +
                          " entries exceeds the cap of " + std::to_string(cap));
    }
    data_.assign(n_modes_ * n_nodes_, 0.0);
  }

  std::size_t n_modes() const { return n_modes_; }
  std::size_t n_nodes() const { return n_nodes_; }

  double at(std::size_t j, std::size_t n) const {
    check(j, n);
    return data_[(j - 1) * n_nodes_ + n];
  }

  double& at(std::size_t j, std::size_t n) {
    check(j, n);
    return data_[(j - 1) * n_nodes_ + n];
  }

  std::span<const double> row(std::size_t j) const {
    check(j, 0);
    return {data_.data() + (j - 1) * n_nodes_, n_nodes_};
  }

  std::span<double> row(std::size_t j) {
    check(j, 0);
    return {data_.data() + (j - 1) * n_nodes_, n_nodes_};
  }

  bool same_shape(const ModalField& other) const {
    return n_modes_ == other.n_modes_ && n_nodes_ == other.n_nodes_;
  }

 private:
  void check(std::size_t j, std::size_t n) const {
    if (j < 1 || j > n_modes_) {
      throw IndexError("mode index " + std::to_string(j) + " outside 1.." +
                       std::to_string(n_modes_));
    }
    if (n >= n_nodes_) {
      throw IndexError("node index " + std::to_string(n) + " outside 0.." +
                       std::to_string(n_nodes_ - 1));
    }
  }

  std::size_t n_modes_ = 0;
  std::size_t n_nodes_ = 0;
  std::vector<double> data_;
};

// Initial modal coefficients y_{0,j}. Presets cover the common test setups.
struct InitialData {
  std::vector<double> coeffs;

  static InitialData zero(std::size_t n) { return {std::vector<double>(n, 0.0)}; }

  static InitialData constant(std::size_t n, double v) {
    return {std::vector<double>(n, v)};
  }

  // y_{0,j} = 1/j, square-summable with slowly decaying tail.
  static InitialData one_over_j(std::size_t n) {
    InitialData d;
    d.coeffs.resize(n);
    for (std::size_t j = 1; j <= n; ++j) {
      d.coeffs[j - 1] = 1.0 / static_cast<double>(j);
    }
    return d;
  }

  double coeff(std::size_t j) const {
    if (j < 1 || j > coeffs.size()) {
      throw IndexError("initial-data index " + std::to_string(j) + " outside 1.." +
                       std::to_string(coeffs.size()));
    }
    return coeffs[j - 1];
  }
};

// Deterministic part of one mode: y_{0,j} e^{-lambda^s t}.
inline double mean_mode(double y0j, double lambda, double s, double t) {
  return y0j * std::exp(-std::pow(lambda, s) * t);
}

// Stationary-free second moment of the stochastic convolution,
// E |W_j(t)|^2 = mu (1 - e^{-2 lambda^s t}) / (2 lambda^s).
inline double second_moment_convolution(double mu, double lambda, double s, double t) {
  const double a = std::pow(lambda, s);
  return mu * (-std::expm1(-2.0 * a * t)) / (2.0 * a);
}

// Left-point discretization of W_j(t_n) = sqrt(mu) int_0^{t_n} e^{-a(t_n-tau)} dB:
// freezing the kernel at the left endpoint of each step gives the one-step
// recursion w[n+1] = e^{-a dt} (w[n] + sqrt(mu) dB_n), identical to the frozen
// Riemann sum term by term.
inline std::vector<double> convolution_mode(const BrownianLattice& lattice,
                                            std::size_t j, double mu, double lambda,
                                            double s) {
  if (!(mu >= 0.0)) {
    throw DomainError("convolution_mode requires mu >= 0");
  }
  const double a = std::pow(lambda, s);
  const double dt = lattice.grid().dt();
  const double decay = std::exp(-a * dt);
  const double amp = std::sqrt(mu);
  const auto db = lattice.mode_increments(j);
  std::vector<double> w(lattice.grid().n_nodes(), 0.0);
  for (std::size_t n = 0; n < db.size(); ++n) {
    w[n + 1] = decay * (w[n] + amp * db[n]);
  }
  return w;
}

// Pathwise modal solution y_j(t_n) = mean + convolution for a fixed exponent,
// tied to the lattice seed it was built from.
class ModalSolution {
 public:
  ModalSolution(double s, const TimeGrid& grid, std::uint64_t seed, ModalField mean,
                ModalField convolution)
      : s_(s),
        grid_(grid),
        seed_(seed),
        mean_(std::move(mean)),
        convolution_(std::move(convolution)) {
    if (!mean_.same_shape(convolution_)) {
      throw ShapeError("mean and convolution parts must share a shape");
    }
    if (mean_.n_nodes() != grid.n_nodes()) {
      throw ShapeError("solution node count does not match the grid");
    }
  }

  double s() const { return s_; }
  const TimeGrid& grid() const { return grid_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t n_modes() const { return mean_.n_modes(); }

  const ModalField& mean() const { return mean_; }
  const ModalField& convolution() const { return convolution_; }

  double value(std::size_t j, std::size_t n) const {
    return mean_.at(j, n) + convolution_.at(j, n);
  }

 private:
  double s_;
  TimeGrid grid_;
  std::uint64_t seed_;
  ModalField mean_;
  ModalField convolution_;
};

// Full pathwise solve on a shared lattice. The mean is evaluated in closed
// form at every node; the convolution uses the left-point recursion above.
// Leaving the admissible interval (or the exponent range where the noise
// trace stays summable) is legitimate during optimization sweeps, so it only
// warns and proceeds.
inline ModalSolution solve_path(const SpectralModel& model, const InitialData& y0,
                                const BrownianLattice& lattice, double s,
                                std::size_t dense_cap = kDefaultDenseCap) {
  if (!(s > 0.0)) {
    throw DomainError("solve_path requires s > 0");
  }
  if (y0.coeffs.size() != model.n_modes()) {
    throw ShapeError("initial data has " + std::to_string(y0.coeffs.size()) +
                     " coefficients, model has " + std::to_string(model.n_modes()) +
                     " modes");
  }
  if (lattice.n_modes() != model.n_modes()) {
    throw ShapeError("lattice mode count does not match the model");
  }

  const AdmissibleInterval adm = admissible_interval(model);
  if (!adm.contains(s)) {
    warn("s = " + std::to_string(s) + " is outside the admissible interval (s_min = " +
         std::to_string(adm.s_min) + ")");
  }
  if (const auto upper = noise_trace_upper_s(model); upper && s >= *upper) {
    warn("s = " + std::to_string(s) +
         " is beyond the exponent range where the noise trace stays summable (< " +
         std::to_string(*upper) + ")");
  }

  const TimeGrid& grid = lattice.grid();
  ModalField mean(model.n_modes(), grid.n_nodes(), dense_cap);
  ModalField conv(model.n_modes(), grid.n_nodes(), dense_cap);
  for (std::size_t j = 1; j <= model.n_modes(); ++j) {
    const double lambda = model.eigenvalue(j);
    const double a = model.fractional_power(j, s);
    const double y0j = y0.coeff(j);
    auto mrow = mean.row(j);
    for (std::size_t n = 0; n < grid.n_nodes(); ++n) {
      mrow[n] = y0j * std::exp(-a * grid.time(n));
    }
    const std::vector<double> w =
        convolution_mode(lattice, j, model.covariance_eigenvalue(j), lambda, s);
    auto crow = conv.row(j);
    for (std::size_t n = 0; n < grid.n_nodes(); ++n) {
      crow[n] = w[n];
    }
  }
  return ModalSolution(s, grid, lattice.seed(), std::move(mean), std::move(conv));
}

// Squared L2(D) distance between the solution and a target field at node n:
// sum_j (y_j(t_n) - yD_j(t_n))^2, by Parseval on the shared eigenbasis.
inline double field_misfit_density(const ModalSolution& solution,
                                   const ModalField& target, std::size_t n) {
  if (target.n_modes() != solution.n_modes() ||
      target.n_nodes() != solution.grid().n_nodes()) {
    throw ShapeError("target field shape does not match the solution");
  }
  double sum = 0.0;
  for (std::size_t j = 1; j <= solution.n_modes(); ++j) {
    const double d = solution.value(j, n) - target.at(j, n);
    sum += d * d;
  }
  return sum;
}

}  // namespace fracid
