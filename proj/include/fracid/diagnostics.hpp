#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "fracid/errors.hpp"
#include "fracid/noise.hpp"
#include "fracid/spectrum.hpp"
#include "fracid/state.hpp"
#include "fracid/stats.hpp"

namespace fracid {

// One exact transition of the modal convolution over a step of length dt:
// w(t+dt) = e^{-a dt} w(t) + eta with eta ~ N(0, mu (1 - e^{-2 a dt})/(2a)).
// Distributionally exact for any dt, which makes it the sampling oracle for
// the moment checks below (the left-point scheme carries an O(a dt) variance
// bias that would eat into the 3-sigma windows).
inline double ou_exact_step(double w, double a, double mu, double dt,
                            std::mt19937_64& rng) {
  const double decay = std::exp(-a * dt);
  if (mu == 0.0) return decay * w;
  const double var = mu * (-std::expm1(-2.0 * a * dt)) / (2.0 * a);
  std::normal_distribution<double> gauss(0.0, std::sqrt(var));
  return decay * w + gauss(rng);
}

struct IsometryEntry {
  std::size_t mode = 0;
  double t = 0.0;
  double empirical_var = 0.0;
  double closed_form = 0.0;
  double z_score = 0.0;
  bool pass = false;  // |z| <= 3
};

// Totals across modes at one checkpoint, checked against the uniform-in-time
// bound E||W(t)||^2 <= tr(Q) / (2 alpha^s).
struct UniformBoundEntry {
  double t = 0.0;
  double empirical = 0.0;
  double standard_error = 0.0;
  double bound = 0.0;
  bool pass = false;  // empirical <= bound + 3 SE
};

struct IsometryCheck {
  std::vector<IsometryEntry> entries;
  std::vector<UniformBoundEntry> totals;
  bool all_pass = false;
};

// Per-mode variance of the stochastic convolution at the checkpoints vs the
// closed form mu (1 - e^{-2 lambda^s t})/(2 lambda^s). The z-score uses the
// Gaussian variance-of-variance 2 sigma^4/(n-1). Checkpoints may be any
// times in [0, t_final]; sampling steps exactly from one to the next.
inline IsometryCheck ito_isometry_check(const SpectralModel& model, const TimeGrid& grid,
                                        double s, std::size_t n_paths,
                                        std::vector<double> t_checkpoints,
                                        std::uint64_t seed) {
  if (n_paths < 2) {
    throw ConfigError("ito_isometry_check needs at least two paths");
  }
  if (t_checkpoints.empty()) {
    throw ConfigError("ito_isometry_check needs at least one checkpoint");
  }
  std::sort(t_checkpoints.begin(), t_checkpoints.end());
  for (double t : t_checkpoints) {
    if (t < 0.0 || t > grid.t_final) {
      throw ConfigError("checkpoint " + std::to_string(t) + " outside [0, " +
                        std::to_string(grid.t_final) + "]");
    }
  }

  const std::size_t n_modes = model.n_modes();
  const std::size_t n_checks = t_checkpoints.size();
  std::vector<double> a(n_modes), mu(n_modes);
  for (std::size_t j = 0; j < n_modes; ++j) {
    a[j] = model.fractional_power(j + 1, s);
    mu[j] = model.covariance_eigenvalue(j + 1);
  }

  // Accumulate first and second moments per (mode, checkpoint) and per-path
  // totals per checkpoint.
  std::vector<double> sum(n_modes * n_checks, 0.0), sumsq(n_modes * n_checks, 0.0);
  std::vector<double> tot_sum(n_checks, 0.0), tot_sumsq(n_checks, 0.0);
  std::vector<double> w(n_modes);
  for (std::size_t p = 0; p < n_paths; ++p) {
    std::mt19937_64 rng(path_seed(seed, p));
    std::fill(w.begin(), w.end(), 0.0);
    double t_prev = 0.0;
    for (std::size_t k = 0; k < n_checks; ++k) {
      const double dt = t_checkpoints[k] - t_prev;
      double total = 0.0;
      for (std::size_t j = 0; j < n_modes; ++j) {
        if (dt > 0.0) w[j] = ou_exact_step(w[j], a[j], mu[j], dt, rng);
        sum[j * n_checks + k] += w[j];
        sumsq[j * n_checks + k] += w[j] * w[j];
        total += w[j] * w[j];
      }
      tot_sum[k] += total;
      tot_sumsq[k] += total * total;
      t_prev = t_checkpoints[k];
    }
  }

  IsometryCheck out;
  out.all_pass = true;
  const double n = static_cast<double>(n_paths);
  for (std::size_t j = 0; j < n_modes; ++j) {
    for (std::size_t k = 0; k < n_checks; ++k) {
      IsometryEntry e;
      e.mode = j + 1;
      e.t = t_checkpoints[k];
      const double m1 = sum[j * n_checks + k] / n;
      e.empirical_var =
          (sumsq[j * n_checks + k] - n * m1 * m1) / (n - 1.0);
      e.closed_form = second_moment_convolution(mu[j], model.eigenvalue(j + 1), s,
                                                t_checkpoints[k]);
      if (e.closed_form > 0.0) {
        const double se = e.closed_form * std::sqrt(2.0 / (n - 1.0));
        e.z_score = (e.empirical_var - e.closed_form) / se;
        e.pass = std::abs(e.z_score) <= 3.0;
      } else {
        e.z_score = 0.0;
        e.pass = (e.empirical_var == 0.0);
      }
      out.all_pass = out.all_pass && e.pass;
      out.entries.push_back(e);
    }
  }
  const double alpha_s = std::pow(model.alpha(), s);
  for (std::size_t k = 0; k < n_checks; ++k) {
    UniformBoundEntry u;
    u.t = t_checkpoints[k];
    u.empirical = tot_sum[k] / n;
    const double var = (tot_sumsq[k] - n * u.empirical * u.empirical) / (n - 1.0);
    u.standard_error = std::sqrt(std::max(var, 0.0) / n);
    u.bound = model.trace() / (2.0 * alpha_s);
    u.pass = u.empirical <= u.bound + 3.0 * u.standard_error;
    out.all_pass = out.all_pass && u.pass;
    out.totals.push_back(u);
  }
  return out;
}

struct HsBoundEntry {
  double t = 0.0;
  double mean_lhs = 0.0;      // sum_j lambda^{2s} m_j(t)^2
  double mean_bound = 0.0;    // kappa(t)^2 ||y0||^2
  bool mean_pass = false;
  double noise_empirical = 0.0;
  double noise_closed_form = 0.0;
  double noise_z = 0.0;
  bool noise_pass = false;  // |z| <= 3
  bool pass = false;
};

// kappa(t) = sup_r r e^{-rt} = 1/(e t), attained at r = 1/t.
inline double kappa(double t) {
  if (!(t > 0.0)) {
    throw DomainError("kappa(t) requires t > 0");
  }
  return 1.0 / (std::exp(1.0) * t);
}

// H^s membership at time t: the mean part must sit below the smoothing
// bound kappa(t)^2 ||y0||^2, and the expected H^s mass of the convolution
// must match sum_j mu_j lambda_j^s (1 - e^{-2 lambda_j^s t})/2 within 3 SE.
// The empirical expectation uses n_paths exact one-shot samples
// W_j(t) ~ N(0, sigma_j^2(t)) seeded from the lattice's seed.
inline HsBoundEntry hs_membership_check(const SpectralModel& model,
                                        const InitialData& y0,
                                        const BrownianLattice& lattice, double s,
                                        double t, std::size_t n_paths = 2000) {
  if (!(t > 0.0)) {
    throw DomainError("hs_membership_check requires t > 0");
  }
  if (t > lattice.grid().t_final) {
    throw ConfigError("checkpoint t exceeds the lattice horizon");
  }
  if (y0.coeffs.size() != model.n_modes()) {
    throw ShapeError("initial data does not match the model mode count");
  }
  if (n_paths < 2) {
    throw ConfigError("hs_membership_check needs at least two paths");
  }

  const std::size_t n_modes = model.n_modes();
  HsBoundEntry out;
  out.t = t;

  double y0_norm_sq = 0.0;
  for (std::size_t j = 1; j <= n_modes; ++j) {
    const double a = model.fractional_power(j, s);
    const double m = y0.coeff(j) * std::exp(-a * t);
    out.mean_lhs += a * a * m * m;  // lambda^{2s} = a^2
    y0_norm_sq += y0.coeff(j) * y0.coeff(j);
  }
  const double k = kappa(t);
  out.mean_bound = k * k * y0_norm_sq;
  out.mean_pass = out.mean_lhs <= out.mean_bound * (1.0 + 1e-12);

  // E sum_j lambda^{2s} W_j(t)^2 = sum_j mu_j lambda_j^s (1 - e^{-2 a t})/2.
  std::vector<double> weight(n_modes), sigma(n_modes);
  for (std::size_t j = 0; j < n_modes; ++j) {
    const double a = model.fractional_power(j + 1, s);
    const double var = second_moment_convolution(model.covariance_eigenvalue(j + 1),
                                                 model.eigenvalue(j + 1), s, t);
    weight[j] = a * a;
    sigma[j] = std::sqrt(var);
    out.noise_closed_form += weight[j] * var;
  }
  std::vector<double> samples(n_paths);
  for (std::size_t p = 0; p < n_paths; ++p) {
    std::mt19937_64 rng(path_seed(lattice.seed(), p));
    std::normal_distribution<double> gauss;
    double mass = 0.0;
    for (std::size_t j = 0; j < n_modes; ++j) {
      const double w = sigma[j] * gauss(rng);
      mass += weight[j] * w * w;
    }
    samples[p] = mass;
  }
  out.noise_empirical = detail::mean(samples);
  const double se =
      std::sqrt(detail::sample_variance(samples) / static_cast<double>(n_paths));
  out.noise_z = (se > 0.0) ? (out.noise_empirical - out.noise_closed_form) / se : 0.0;
  out.noise_pass = std::abs(out.noise_z) <= 3.0;
  out.pass = out.mean_pass && out.noise_pass;
  return out;
}

struct L2BoundEntry {
  double s = 0.0;
  double empirical = 0.0;
  double standard_error = 0.0;
  double exact_value = 0.0;
  double coarse_bound = 0.0;
  double z_exact = 0.0;
  bool within_exact = false;  // |z| <= 3
  bool within_bound = false;  // empirical <= bound + 3 SE
  bool pass = false;
};

// Exact modal value of E int_0^T ||y(t)||^2 dt.
inline double l2_exact_value(const SpectralModel& model, const InitialData& y0,
                             double s, double T) {
  double total = 0.0;
  for (std::size_t j = 1; j <= model.n_modes(); ++j) {
    const double a = model.fractional_power(j, s);
    const double mu = model.covariance_eigenvalue(j);
    const double y0j = y0.coeff(j);
    total += y0j * y0j * (-std::expm1(-2.0 * a * T)) / (2.0 * a);
    total += mu * (T / (2.0 * a) + std::expm1(-2.0 * a * T) / (4.0 * a * a));
  }
  return total;
}

// Coarse a-priori bound (T / (2 alpha^s)) tr(Q) + ||y0||^2 / (2 alpha).
inline double l2_coarse_bound(const SpectralModel& model, const InitialData& y0,
                              double s, double T) {
  double y0_norm_sq = 0.0;
  for (double v : y0.coeffs) y0_norm_sq += v * v;
  return T * model.trace() / (2.0 * std::pow(model.alpha(), s)) +
         y0_norm_sq / (2.0 * model.alpha());
}

// Empirical E||y||^2_{L2(D_T)} via trapezoid in time over exact-transition
// samples, against both the exact closed form (3-sigma window) and the
// coarse a-priori bound (never exceeded beyond 3 SE).
inline L2BoundEntry l2_apriori_check(const SpectralModel& model, const InitialData& y0,
                                     double s, const TimeGrid& grid,
                                     std::size_t n_paths, std::uint64_t seed) {
  if (y0.coeffs.size() != model.n_modes()) {
    throw ShapeError("initial data does not match the model mode count");
  }
  if (n_paths < 2) {
    throw ConfigError("l2_apriori_check needs at least two paths");
  }
  const std::size_t n_modes = model.n_modes();
  const std::size_t M = grid.n_steps;
  const double dt = grid.dt();

  // Per-mode constants: mean curve plus the exact one-step transition pair.
  std::vector<double> decay(n_modes), step_sd(n_modes);
  std::vector<std::vector<double>> mean_curve(n_modes);
  for (std::size_t j = 0; j < n_modes; ++j) {
    const double a = model.fractional_power(j + 1, s);
    const double mu = model.covariance_eigenvalue(j + 1);
    decay[j] = std::exp(-a * dt);
    step_sd[j] = std::sqrt(mu * (-std::expm1(-2.0 * a * dt)) / (2.0 * a));
    mean_curve[j].resize(M + 1);
    for (std::size_t n = 0; n <= M; ++n) {
      mean_curve[j][n] = y0.coeff(j + 1) * std::exp(-a * grid.time(n));
    }
  }

  std::vector<double> samples(n_paths);
  std::vector<double> w(n_modes);
  for (std::size_t p = 0; p < n_paths; ++p) {
    std::mt19937_64 rng(path_seed(seed, p));
    std::normal_distribution<double> gauss;
    std::fill(w.begin(), w.end(), 0.0);
    double integral = 0.0;
    for (std::size_t n = 0; n <= M; ++n) {
      double density = 0.0;
      for (std::size_t j = 0; j < n_modes; ++j) {
        if (n > 0) w[j] = decay[j] * w[j] + step_sd[j] * gauss(rng);
        const double y = mean_curve[j][n] + w[j];
        density += y * y;
      }
      integral += (n == 0 || n == M) ? 0.5 * density : density;
    }
    samples[p] = integral * dt;
  }

  L2BoundEntry out;
  out.s = s;
  out.empirical = detail::mean(samples);
  out.standard_error =
      std::sqrt(detail::sample_variance(samples) / static_cast<double>(n_paths));
  out.exact_value = l2_exact_value(model, y0, s, grid.t_final);
  out.coarse_bound = l2_coarse_bound(model, y0, s, grid.t_final);
  out.z_exact = (out.standard_error > 0.0)
                    ? (out.empirical - out.exact_value) / out.standard_error
                    : 0.0;
  out.within_exact = std::abs(out.z_exact) <= 3.0;
  out.within_bound = out.empirical <= out.coarse_bound + 3.0 * out.standard_error;
  out.pass = out.within_exact && out.within_bound;
  return out;
}

struct HolderEstimate {
  double slope = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool pass = false;        // 90% interval intersects (0, 1/2]
  bool noise_free = false;  // slope near 1: differentiable (mean-only) path
  std::vector<double> lag_times;
  std::vector<double> median_increments;
};

// Pathwise Hoelder exponent from one solution: median L2(D) increment per
// lag, log-log regression over the lags, and a bootstrap 90% interval from
// resampling the increments within each lag.
inline HolderEstimate holder_estimate(const ModalSolution& solution,
                                      const std::vector<std::size_t>& lags,
                                      std::size_t n_boot = 400,
                                      std::uint64_t boot_seed = 1u) {
  const std::size_t M = solution.grid().n_steps;
  if (lags.size() < 3) {
    throw ConfigError("holder_estimate needs at least 3 lags");
  }
  for (std::size_t i = 0; i < lags.size(); ++i) {
    if (lags[i] == 0 || lags[i] > M / 4) {
      throw ConfigError("lags must lie in [1, n_steps/4]");
    }
    if (i > 0 && lags[i] <= lags[i - 1]) {
      throw ConfigError("lags must be strictly increasing");
    }
  }
  if (n_boot < 50) {
    throw ConfigError("holder_estimate needs at least 50 bootstrap replicates");
  }

  // ||y(t_{n+k}) - y(t_n)||_{L2(D)} for every admissible n, per lag.
  std::vector<std::vector<double>> increments(lags.size());
  for (std::size_t li = 0; li < lags.size(); ++li) {
    const std::size_t k = lags[li];
    increments[li].resize(M + 1 - k);
    for (std::size_t n = 0; n + k <= M; ++n) {
      double sq = 0.0;
      for (std::size_t j = 1; j <= solution.n_modes(); ++j) {
        const double d = solution.value(j, n + k) - solution.value(j, n);
        sq += d * d;
      }
      increments[li][n] = std::sqrt(sq);
    }
  }

  HolderEstimate out;
  std::vector<double> log_dt(lags.size()), log_med(lags.size());
  for (std::size_t li = 0; li < lags.size(); ++li) {
    std::vector<double> copy = increments[li];
    const double med = detail::median_inplace(copy);
    if (!(med > 0.0)) {
      throw EstimationError("degenerate path: zero median increment at lag " +
                            std::to_string(lags[li]));
    }
    const double lag_t = static_cast<double>(lags[li]) * solution.grid().dt();
    out.lag_times.push_back(lag_t);
    out.median_increments.push_back(med);
    log_dt[li] = std::log(lag_t);
    log_med[li] = std::log(med);
  }
  out.slope = detail::regression_slope(log_dt, log_med);

  std::mt19937_64 rng(boot_seed);
  std::vector<double> slopes(n_boot);
  std::vector<double> resampled;
  for (std::size_t b = 0; b < n_boot; ++b) {
    std::vector<double> boot_log_med(lags.size());
    for (std::size_t li = 0; li < lags.size(); ++li) {
      const auto& pool = increments[li];
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      resampled.resize(pool.size());
      for (double& v : resampled) v = pool[pick(rng)];
      const double med = detail::median_inplace(resampled);
      if (!(med > 0.0)) {
        throw EstimationError("degenerate bootstrap resample at lag " +
                              std::to_string(lags[li]));
      }
      boot_log_med[li] = std::log(med);
    }
    slopes[b] = detail::regression_slope(log_dt, boot_log_med);
  }
  std::sort(slopes.begin(), slopes.end());
  out.ci_low = detail::quantile_sorted(slopes, 0.05);
  out.ci_high = detail::quantile_sorted(slopes, 0.95);
  out.pass = out.ci_low <= 0.5 && out.ci_high > 0.0;
  out.noise_free = out.slope >= 0.9;
  return out;
}

struct FactorizationCheck {
  double beta = 0.0;
  double value = 0.0;
  bool finite = false;
};

namespace detail {

// Adaptive Simpson with absolute tolerance.
inline double simpson_recurse(const std::function<double(double)>& f, double a,
                              double b, double fa, double fm, double fb, double whole,
                              double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol) {
    return left + right + (left + right - whole) / 15.0;
  }
  return simpson_recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a,
                               double b, double tol = 1e-12, int depth = 40) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_recurse(f, a, b, fa, fm, fb, whole, tol, depth);
}

}  // namespace detail

// Finite-sum factorization condition: int_0^T t^{-2 beta} sum_j mu_j
// e^{-2 lambda_j^s t} dt must be finite for beta < 1/2. The substitution
// t = tau^{1/(1-2 beta)} absorbs the endpoint singularity, leaving a smooth
// integrand for the adaptive rule.
inline FactorizationCheck factorization_check(const SpectralModel& model, double s,
                                              double beta, double t_final) {
  if (!(beta >= 0.0) || !(beta < 0.5)) {
    throw DomainError("factorization_check requires beta in [0, 1/2); the integral "
                      "diverges at beta >= 1/2");
  }
  if (!(t_final > 0.0)) {
    throw DomainError("factorization_check requires t_final > 0");
  }
  const std::size_t n_modes = model.n_modes();
  std::vector<double> a(n_modes), mu(n_modes);
  for (std::size_t j = 0; j < n_modes; ++j) {
    a[j] = model.fractional_power(j + 1, s);
    mu[j] = model.covariance_eigenvalue(j + 1);
  }
  const double p = 1.0 / (1.0 - 2.0 * beta);
  const auto integrand = [&](double tau) {
    const double t = std::pow(tau, p);
    double h = 0.0;
    for (std::size_t j = 0; j < n_modes; ++j) {
      h += mu[j] * std::exp(-2.0 * a[j] * t);
    }
    return p * h;
  };
  FactorizationCheck out;
  out.beta = beta;
  out.value = detail::adaptive_simpson(integrand, 0.0, std::pow(t_final, 1.0 / p));
  out.finite = std::isfinite(out.value);
  return out;
}

}  // namespace fracid
