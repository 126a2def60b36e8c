#pragma once

#include <quadmath.h>

#include <atomic>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fracid/fracid.hpp"

namespace testutil {

// Central finite differences of E(s) = e^{-lambda^s u} in quad precision.
// The second difference loses ~2*17 digits of cancellation headroom at
// h = 1e-5, which double cannot afford but __float128 can.
struct KernelFd {
  double d1;
  double d2;
};

inline KernelFd kernel_fd(double lambda, double u, double s, double h) {
  const auto E = [&](__float128 ss) -> __float128 {
    const __float128 a = powq(static_cast<__float128>(lambda), ss);
    return expq(-a * static_cast<__float128>(u));
  };
  const __float128 hh = h;
  const __float128 s0 = s;
  const __float128 fp = E(s0 + hh);
  const __float128 fm = E(s0 - hh);
  const __float128 f0 = E(s0);
  KernelFd out;
  out.d1 = static_cast<double>((fp - fm) / (2.0Q * hh));
  out.d2 = static_cast<double>((fp - 2.0Q * f0 + fm) / (hh * hh));
  return out;
}

// Relative error with an absolute floor so near-zero references do not blow
// the ratio up.
inline double rel_err(double got, double want, double floor = 1e-12) {
  const double scale = std::max({std::abs(want), std::abs(got), floor});
  return std::abs(got - want) / scale;
}

// O(M^2) left-point sums: the independent oracle for the convolution
// recursions. Order 0 is the value, orders 1 and 2 its s-derivatives.
inline double conv_direct(const fracid::BrownianLattice& lat, std::size_t j, double mu,
                          double lambda, double s, std::size_t n, int order) {
  const double dt = lat.grid().dt();
  const double amp = std::sqrt(mu);
  double sum = 0.0;
  for (std::size_t m = 0; m < n; ++m) {
    const double u = static_cast<double>(n - m) * dt;
    const auto kd = fracid::kernel_derivatives(lambda, u, s);
    const double k = (order == 0) ? kd.value : (order == 1 ? kd.d1 : kd.d2);
    sum += k * amp * lat.increment(j, m);
  }
  return sum;
}

// Adaptive Simpson re-exported for oracle integrals in tests.
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-12) {
  return fracid::detail::adaptive_simpson(f, a, b, tol);
}

// Throwaway directory removed when the guard leaves scope. Unique per
// instance so parallel test binaries cannot collide.
struct ScratchDir {
  std::filesystem::path path;

  ScratchDir() {
    static std::atomic<unsigned> counter{0};
    static const unsigned nonce = std::random_device{}();
    const unsigned id = counter.fetch_add(1);
    path = std::filesystem::temp_directory_path() /
           ("fracid_test_" + std::to_string(nonce) + "_" + std::to_string(id));
    std::filesystem::create_directories(path);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  std::filesystem::path file(const std::string& name) const { return path / name; }
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace testutil
