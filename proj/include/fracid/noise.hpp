#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fracid/errors.hpp"
#include "fracid/spectrum.hpp"

namespace fracid {

// Uniform grid 0 = t_0 < t_1 < ... < t_M = t_final with t_n = n * dt.
struct TimeGrid {
  TimeGrid(double t_final_, std::size_t n_steps_)
      : t_final(t_final_), n_steps(n_steps_) {
    if (!(t_final > 0.0) || !std::isfinite(t_final)) {
      throw ConfigError("time grid needs t_final > 0");
    }
    if (n_steps == 0) {
      throw ConfigError("time grid needs at least one step");
    }
  }

  double t_final;
  std::size_t n_steps;

  double dt() const { return t_final / static_cast<double>(n_steps); }
  std::size_t n_nodes() const { return n_steps + 1; }

  double time(std::size_t n) const {
    if (n > n_steps) {
      throw IndexError("time index " + std::to_string(n) + " outside 0.." +
                       std::to_string(n_steps));
    }
    return static_cast<double>(n) * dt();
  }

  bool operator==(const TimeGrid& other) const {
    return t_final == other.t_final && n_steps == other.n_steps;
  }
};

// Deterministic per-path seed: golden-ratio multiplicative spread over the
// path index (0-based), XORed into the master seed. Paths are reproducible
// individually, independent of how the ensemble is scheduled over threads.
inline std::uint64_t path_seed(std::uint64_t master_seed, std::uint64_t path_index) {
  return master_seed ^ (path_index * 0x9E3779B97F4A7C15ULL);
}

// Increments of n_modes independent scalar Brownian motions on a shared
// grid: entry (j, n) is B_j(t_{n+1}) - B_j(t_n) ~ N(0, dt). Unit-covariance
// by construction; the mu_j weights are applied by the consumers. Draw order
// is row-major (mode 1 first), so a given (seed, shape) fixes every entry.
class BrownianLattice {
 public:
  BrownianLattice(std::uint64_t seed, std::size_t n_modes, const TimeGrid& grid)
      : seed_(seed), n_modes_(n_modes), grid_(grid) {
    if (n_modes_ == 0) {
      throw ConfigError("Brownian lattice needs at least one mode");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, std::sqrt(grid.dt()));
    increments_.resize(n_modes_ * grid.n_steps);
    for (double& db : increments_) {
      db = gauss(rng);
    }
  }

  std::uint64_t seed() const { return seed_; }
  std::size_t n_modes() const { return n_modes_; }
  const TimeGrid& grid() const { return grid_; }

  // j is 1-based, n is the 0-based step index (increment over [t_n, t_{n+1}]).
  double increment(std::size_t j, std::size_t n) const {
    check(j, n);
    return increments_[(j - 1) * grid_.n_steps + n];
  }

  std::span<const double> mode_increments(std::size_t j) const {
    check(j, 0);
    return {increments_.data() + (j - 1) * grid_.n_steps, grid_.n_steps};
  }

 private:
  void check(std::size_t j, std::size_t n) const {
    if (j < 1 || j > n_modes_) {
      throw IndexError("mode index " + std::to_string(j) + " outside 1.." +
                       std::to_string(n_modes_));
    }
    if (n >= grid_.n_steps) {
      throw IndexError("step index " + std::to_string(n) + " outside 0.." +
                       std::to_string(grid_.n_steps - 1));
    }
  }

  std::uint64_t seed_;
  std::size_t n_modes_;
  TimeGrid grid_;
  std::vector<double> increments_;
};

inline BrownianLattice generate(std::uint64_t seed, const SpectralModel& model,
                                const TimeGrid& grid) {
  return BrownianLattice(seed, model.n_modes(), grid);
}

// B_j(t_n): forward prefix sum of the increments, so B_j(t_0) = 0 and the
// terminal value equals the plain row sum bit for bit.
inline double path_value(const BrownianLattice& lattice, std::size_t j, std::size_t n) {
  if (n > lattice.grid().n_steps) {
    throw IndexError("node index " + std::to_string(n) + " outside 0.." +
                     std::to_string(lattice.grid().n_steps));
  }
  double b = 0.0;
  for (std::size_t m = 0; m < n; ++m) {
    b += lattice.increment(j, m);
  }
  return b;
}

}  // namespace fracid
