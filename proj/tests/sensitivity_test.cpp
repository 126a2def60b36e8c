#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "helpers.hpp"

using namespace fracid;

TEST_CASE("kernel derivatives: closed form against quad-precision FD", "[sensitivity]") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> ul(1.0, 100.0), uu(0.01, 2.0), us(0.2, 3.0);
  for (int rep = 0; rep < 200; ++rep) {
    const double lambda = ul(rng), u = uu(rng), s = us(rng);
    const KernelDerivatives kd = kernel_derivatives(lambda, u, s);
    const testutil::KernelFd fd = testutil::kernel_fd(lambda, u, s, 1e-5);
    REQUIRE(testutil::rel_err(kd.d1, fd.d1) < 1e-6);
    REQUIRE(testutil::rel_err(kd.d2, fd.d2) < 1e-6);
    REQUIRE(kd.value == std::exp(-std::pow(lambda, s) * u));
  }
}

TEST_CASE("kernel derivative edge cases", "[sensitivity]") {
  // u = 0: kernel identically 1 in s
  const KernelDerivatives at0 = kernel_derivatives(5.0, 0.0, 1.3);
  REQUIRE(at0.value == 1.0);
  REQUIRE(at0.d1 == 0.0);
  REQUIRE(at0.d2 == 0.0);
  // lambda = 1: lambda^s constant, all s-derivatives vanish
  const KernelDerivatives at1 = kernel_derivatives(1.0, 0.7, 2.0);
  REQUIRE(at1.value == std::exp(-0.7));
  REQUIRE(at1.d1 == 0.0);
  REQUIRE(at1.d2 == 0.0);
  REQUIRE_THROWS_AS(kernel_derivatives(0.0, 1.0, 1.0), DomainError);
  REQUIRE_THROWS_AS(kernel_derivatives(2.0, -0.1, 1.0), DomainError);
  REQUIRE_THROWS_AS(kernel_derivatives(2.0, 1.0, 0.0), DomainError);
}

TEST_CASE("majorant bound holds on the reference sweep", "[sensitivity]") {
  // Coarser replica of the sweep the constants were frozen on.
  for (int il = 0; il <= 40; ++il) {
    const double lambda = std::pow(10.0, 4.0 * il / 40.0);
    for (int iu = 0; iu <= 60; ++iu) {
      const double u = std::pow(10.0, -8.0 + 9.0 * iu / 60.0);
      for (int is = 0; is <= 40; ++is) {
        const double s = 0.05 + (5.0 - 0.05) * is / 40.0;
        const MajorantCheck m1 = majorant_check(lambda, u, s, 1);
        const MajorantCheck m2 = majorant_check(lambda, u, s, 2);
        REQUIRE(m1.holds);
        REQUIRE(m2.holds);
      }
    }
  }
}

TEST_CASE("majorant check guards its arguments", "[sensitivity]") {
  REQUIRE_THROWS_AS(majorant_check(2.0, 1.0, 1.0, 3), ArgumentError);
  REQUIRE_THROWS_AS(majorant_check(2.0, 1.0, 1.0, 0), ArgumentError);
  REQUIRE_THROWS_AS(majorant_check(0.5, 1.0, 1.0, 1), DomainError);
  REQUIRE_THROWS_AS(majorant_check(2.0, 0.0, 1.0, 1), DomainError);
  const MajorantCheck m = majorant_check(3.0, 0.5, 1.2, 2);
  REQUIRE(m.constant == kMajorantC2);
  REQUIRE(m.bound > 0.0);
}

TEST_CASE("sensitivity convolutions equal their direct sums", "[sensitivity]") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> ul(1.2, 40.0), us(0.3, 2.2), um(0.1, 2.0),
      ut(0.5, 2.0);
  for (int rep = 0; rep < 20; ++rep) {
    const double lambda = ul(rng), s = us(rng), mu = um(rng), T = ut(rng);
    const std::size_t M = 50 + static_cast<std::size_t>(rep);
    const TimeGrid grid(T, M);
    const BrownianLattice lat(9000 + rep, 1, grid);
    const auto d1 = sensitivity_conv_mode(lat, 1, mu, lambda, s, 1);
    const auto d2 = sensitivity_conv_mode(lat, 1, mu, lambda, s, 2);
    REQUIRE(d1[0] == 0.0);
    REQUIRE(d2[0] == 0.0);
    for (std::size_t n : {M / 4, M / 2, M}) {
      REQUIRE(testutil::rel_err(d1[n], testutil::conv_direct(lat, 1, mu, lambda, s, n, 1)) <
              1e-10);
      REQUIRE(testutil::rel_err(d2[n], testutil::conv_direct(lat, 1, mu, lambda, s, n, 2)) <
              1e-10);
    }
  }
}

TEST_CASE("sensitivity convolutions are s-derivatives of the value", "[sensitivity]") {
  // Central differences of the recursion in s converge to the assembled
  // derivative rows: the derivative is taken of the discrete sum itself.
  const TimeGrid grid(1.5, 96);
  const BrownianLattice lat(5150, 1, grid);
  const double lambda = 7.0, mu = 0.8, s = 1.1, h = 1e-5;
  const auto d1 = sensitivity_conv_mode(lat, 1, mu, lambda, s, 1);
  const auto d2 = sensitivity_conv_mode(lat, 1, mu, lambda, s, 2);
  const auto wp = convolution_mode(lat, 1, mu, lambda, s + h);
  const auto wm = convolution_mode(lat, 1, mu, lambda, s - h);
  const auto w0 = convolution_mode(lat, 1, mu, lambda, s);
  double scale1 = 0.0, scale2 = 0.0;
  for (std::size_t n = 0; n <= 96; ++n) {
    scale1 = std::max(scale1, std::abs(d1[n]));
    scale2 = std::max(scale2, std::abs(d2[n]));
  }
  for (std::size_t n = 0; n <= 96; ++n) {
    const double fd1 = (wp[n] - wm[n]) / (2.0 * h);
    const double fd2 = (wp[n] - 2.0 * w0[n] + wm[n]) / (h * h);
    REQUIRE(std::abs(fd1 - d1[n]) <= 1e-7 * std::max(1.0, scale1));
    REQUIRE(std::abs(fd2 - d2[n]) <= 1e-4 * std::max(1.0, scale2));
  }
}

TEST_CASE("mean sensitivities scale the kernel derivatives", "[sensitivity]") {
  const double y0 = 0.6, lambda = 9.0, s = 0.9, t = 0.4;
  const KernelDerivatives kd = kernel_derivatives(lambda, t, s);
  REQUIRE(sensitivity_mean_mode(y0, lambda, s, t, 1) == y0 * kd.d1);
  REQUIRE(sensitivity_mean_mode(y0, lambda, s, t, 2) == y0 * kd.d2);
  REQUIRE_THROWS_AS(sensitivity_mean_mode(y0, lambda, s, t, 3), ArgumentError);
  REQUIRE_THROWS_AS(sensitivity_conv_mode(BrownianLattice(1, 1, TimeGrid(1.0, 4)), 1,
                                          1.0, 2.0, 1.0, 0),
                    ArgumentError);
}

TEST_CASE("assembled sensitivities match the per-mode pieces", "[sensitivity]") {
  warnings_enabled() = false;
  const SpectralModel model(PowerLawEigenvalues{1.0, 2.0},
                            MatchedDecayCovariance{1.0, 1.0}, 0.5, 3);
  const InitialData y0 = InitialData::one_over_j(3);
  const TimeGrid grid(1.0, 48);
  const BrownianLattice lat(808, 3, grid);
  const double s = 1.2;
  const SensitivitySolution sens = assemble_sensitivities(model, y0, lat, s);
  REQUIRE(sens.s() == s);
  REQUIRE(sens.seed() == 808);
  for (std::size_t j = 1; j <= 3; ++j) {
    const double lambda = model.eigenvalue(j);
    const double mu = model.covariance_eigenvalue(j);
    const auto c1 = sensitivity_conv_mode(lat, j, mu, lambda, s, 1);
    const auto c2 = sensitivity_conv_mode(lat, j, mu, lambda, s, 2);
    for (std::size_t n = 0; n <= 48; ++n) {
      REQUIRE(sens.d1_mean().at(j, n) ==
              sensitivity_mean_mode(y0.coeff(j), lambda, s, grid.time(n), 1));
      REQUIRE(sens.d2_mean().at(j, n) ==
              sensitivity_mean_mode(y0.coeff(j), lambda, s, grid.time(n), 2));
      REQUIRE(sens.d1_convolution().at(j, n) == c1[n]);
      REQUIRE(sens.d2_convolution().at(j, n) == c2[n]);
      REQUIRE(sens.d1(j, n) == sens.d1_mean().at(j, n) + sens.d1_convolution().at(j, n));
    }
  }
  REQUIRE_THROWS_AS(assemble_sensitivities(model, InitialData::zero(2), lat, s),
                    ShapeError);
  REQUIRE_THROWS_AS(assemble_sensitivities(model, y0, lat, -0.5), DomainError);
  warnings_enabled() = true;
}

TEST_CASE("pathwise linearization remainder shrinks quadratically", "[sensitivity]") {
  // ||y(s+h) - y(s) - h dy(s)||^2 over the space-time cylinder scales like
  // h^4; dropping h tenfold shrinks it by ~10^4 (>= 50 asserted, matching
  // the acceptance gate's generous margin).
  warnings_enabled() = false;
  const SpectralModel model(PowerLawEigenvalues{1.0, 2.0},
                            MatchedDecayCovariance{1.0, 1.0}, 0.5, 8);
  const InitialData y0 = InitialData::one_over_j(8);
  const TimeGrid grid(1.0, 256);
  const BrownianLattice lat(31337, 8, grid);
  const double s = 1.0;
  const ModalSolution base = solve_path(model, y0, lat, s);
  const SensitivitySolution sens = assemble_sensitivities(model, y0, lat, s);
  const auto remainder = [&](double h) {
    const ModalSolution pert = solve_path(model, y0, lat, s + h);
    std::vector<double> density(grid.n_nodes(), 0.0);
    for (std::size_t n = 0; n < grid.n_nodes(); ++n) {
      double sq = 0.0;
      for (std::size_t j = 1; j <= 8; ++j) {
        const double r = pert.value(j, n) - base.value(j, n) - h * sens.d1(j, n);
        sq += r * r;
      }
      density[n] = sq;
    }
    double acc = 0.5 * (density.front() + density.back());
    for (std::size_t n = 1; n + 1 < density.size(); ++n) acc += density[n];
    return acc * grid.dt();
  };
  const double r2 = remainder(1e-2);
  const double r3 = remainder(1e-3);
  REQUIRE(r2 / r3 >= 50.0);
  warnings_enabled() = true;
}
