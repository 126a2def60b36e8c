#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fracid/errors.hpp"

namespace fracid {

// lambda_j = c * j^q, ascending for q > 0.
struct PowerLawEigenvalues {
  double c = 1.0;
  double q = 2.0;
};

// Finite nondecreasing list; the first n_modes entries are used.
struct ExplicitEigenvalues {
  std::vector<double> values;
};

using EigenvalueLaw = std::variant<PowerLawEigenvalues, ExplicitEigenvalues>;

// mu_j = lambda_j^(-2*s_ref - epsilon): noise trace stays summable for every
// exponent below s_ref + (epsilon - 1/q)/... see noise_trace_upper_s.
struct MatchedDecayCovariance {
  double epsilon = 1.0;
  double s_ref = 1.0;
};

struct ExplicitCovariance {
  std::vector<double> values;
};

// mu_j = c0 * lambda_j^(-r)
struct PowerLawCovariance {
  double c0 = 1.0;
  double r = 2.0;
};

using CovarianceLaw =
    std::variant<MatchedDecayCovariance, ExplicitCovariance, PowerLawCovariance>;

// Truncated spectral data of the operator pair (L, Q): eigenvalues lambda_j
// of L and covariance eigenvalues mu_j of Q on a shared eigenbasis, plus the
// spectral floor alpha < lambda_1. Immutable after construction; everything
// is validated up front so downstream code can assume the invariants.
class SpectralModel {
 public:
  SpectralModel(EigenvalueLaw eigenvalue_law, CovarianceLaw covariance_law,
                double alpha, std::size_t n_modes)
      : eigenvalue_law_(std::move(eigenvalue_law)),
        covariance_law_(std::move(covariance_law)),
        alpha_(alpha),
        n_modes_(n_modes) {
    if (n_modes_ == 0) {
      throw ModelValidationError("n_modes must be at least 1");
    }
    if (!(alpha_ > 0.0) || !std::isfinite(alpha_)) {
      throw ModelValidationError("alpha must be a positive finite number");
    }
    build_eigenvalues();
    build_covariance();
  }

  std::size_t n_modes() const { return n_modes_; }
  double alpha() const { return alpha_; }
  const EigenvalueLaw& eigenvalue_law() const { return eigenvalue_law_; }
  const CovarianceLaw& covariance_law() const { return covariance_law_; }

  // Modes are 1-based throughout the public interface.
  double eigenvalue(std::size_t j) const {
    check_mode(j);
    return lambda_[j - 1];
  }

  double covariance_eigenvalue(std::size_t j) const {
    check_mode(j);
    return mu_[j - 1];
  }

  const std::vector<double>& eigenvalues() const { return lambda_; }
  const std::vector<double>& covariance_spectrum() const { return mu_; }

  // lambda_j^s for s > 0.
  double fractional_power(std::size_t j, double s) const {
    check_mode(j);
    if (!(s > 0.0)) {
      throw DomainError("fractional_power requires s > 0");
    }
    const double a = std::pow(lambda_[j - 1], s);
    if (!std::isfinite(a)) {
      throw NumericError("lambda_j^s overflowed for mode " + std::to_string(j));
    }
    return a;
  }

  // tr Q = sum_j mu_j over the retained modes.
  double trace() const {
    double sum = 0.0;
    for (double m : mu_) sum += m;
    return sum;
  }

 private:
  void check_mode(std::size_t j) const {
    if (j < 1 || j > n_modes_) {
      throw IndexError("mode index " + std::to_string(j) + " outside 1.." +
                       std::to_string(n_modes_));
    }
  }

  void build_eigenvalues() {
    lambda_.resize(n_modes_);
    if (const auto* pl = std::get_if<PowerLawEigenvalues>(&eigenvalue_law_)) {
      if (!(pl->c > 0.0) || !(pl->q > 0.0)) {
        throw ModelValidationError("power-law eigenvalues need c > 0 and q > 0");
      }
      for (std::size_t j = 1; j <= n_modes_; ++j) {
        lambda_[j - 1] = pl->c * std::pow(static_cast<double>(j), pl->q);
      }
    } else {
      const auto& ex = std::get<ExplicitEigenvalues>(eigenvalue_law_);
      if (ex.values.size() < n_modes_) {
        throw ModelValidationError(
            "explicit eigenvalue list has " + std::to_string(ex.values.size()) +
            " entries, need at least n_modes = " + std::to_string(n_modes_));
      }
      for (std::size_t j = 0; j < n_modes_; ++j) {
        lambda_[j] = ex.values[j];
      }
    }
    for (std::size_t j = 0; j < n_modes_; ++j) {
      if (!(lambda_[j] > 0.0) || !std::isfinite(lambda_[j])) {
        throw ModelValidationError("eigenvalues must be positive and finite");
      }
      if (j > 0 && lambda_[j] < lambda_[j - 1]) {
        throw ModelValidationError("eigenvalues must be nondecreasing");
      }
    }
    if (!(lambda_.front() > alpha_)) {
      throw ModelValidationError("spectral floor violated: need lambda_1 > alpha");
    }
  }

  void build_covariance() {
    mu_.resize(n_modes_);
    if (const auto* md = std::get_if<MatchedDecayCovariance>(&covariance_law_)) {
      if (!(md->epsilon > 0.0) || !(md->s_ref > 0.0)) {
        throw ModelValidationError("matched-decay covariance needs epsilon > 0 and s_ref > 0");
      }
      const double decay = 2.0 * md->s_ref + md->epsilon;
      for (std::size_t j = 0; j < n_modes_; ++j) {
        mu_[j] = std::pow(lambda_[j], -decay);
      }
    } else if (const auto* pl = std::get_if<PowerLawCovariance>(&covariance_law_)) {
      if (!(pl->c0 > 0.0)) {
        throw ModelValidationError("power-law covariance needs c0 > 0");
      }
      for (std::size_t j = 0; j < n_modes_; ++j) {
        mu_[j] = pl->c0 * std::pow(lambda_[j], -pl->r);
      }
    } else {
      const auto& ex = std::get<ExplicitCovariance>(covariance_law_);
      if (ex.values.size() < n_modes_) {
        throw ModelValidationError(
            "explicit covariance list has " + std::to_string(ex.values.size()) +
            " entries, need at least n_modes = " + std::to_string(n_modes_));
      }
      for (std::size_t j = 0; j < n_modes_; ++j) {
        mu_[j] = ex.values[j];
      }
    }
    for (std::size_t j = 0; j < n_modes_; ++j) {
      if (!(mu_[j] >= 0.0) || !std::isfinite(mu_[j])) {
        throw ModelValidationError("covariance eigenvalues must be nonnegative and finite");
      }
    }
  }

  EigenvalueLaw eigenvalue_law_;
  CovarianceLaw covariance_law_;
  double alpha_;
  std::size_t n_modes_;
  std::vector<double> lambda_;
  std::vector<double> mu_;
};

// ||v||_{H^s}^2 = sum_j lambda_j^{2s} v_j^2 (H^0 is plain l2).
inline double hs_norm_sq(const SpectralModel& model, std::span<const double> coeffs,
                         double s) {
  if (coeffs.size() != model.n_modes()) {
    throw ShapeError("coefficient vector length " + std::to_string(coeffs.size()) +
                     " does not match n_modes = " + std::to_string(model.n_modes()));
  }
  if (s < 0.0) {
    throw DomainError("hs_norm_sq requires s >= 0");
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < coeffs.size(); ++j) {
    const double w = (s == 0.0) ? 1.0 : std::pow(model.eigenvalues()[j], 2.0 * s);
    sum += w * coeffs[j] * coeffs[j];
  }
  return sum;
}

enum class AdmissibleBasis { Analytic, NumericHeuristic };

// Open interval of exponents where the truncation-independent theory applies.
// s_max is +inf when no upper restriction was supplied.
struct AdmissibleInterval {
  double s_min = 0.0;
  double s_max = std::numeric_limits<double>::infinity();
  AdmissibleBasis basis = AdmissibleBasis::Analytic;

  bool unbounded() const { return std::isinf(s_max); }
  bool contains(double s) const { return s > s_min && s < s_max; }
};

namespace detail {

// Partial-sum ratio test for explicit spectra: sum over the tail half of
// lambda_j^{-s} must be < 1e-6 of the head half. Crude but monotone in s,
// which is all the bisection below needs.
inline bool tail_ratio_converged(const std::vector<double>& lambda, double s) {
  const std::size_t n = lambda.size();
  const std::size_t split = (n + 1) / 2;
  if (split >= n) return true;  // no tail to control
  double head = 0.0, tail = 0.0;
  for (std::size_t j = 0; j < split; ++j) head += std::pow(lambda[j], -s);
  for (std::size_t j = split; j < n; ++j) tail += std::pow(lambda[j], -s);
  return tail < 1e-6 * head;
}

}  // namespace detail

// Lower admissible exponent: 1/q exactly for power-law eigenvalues, else the
// smallest s passing the tail-ratio test (documented heuristic, usually very
// conservative for slowly growing explicit lists).
inline AdmissibleInterval admissible_interval(
    const SpectralModel& model,
    double s_upper = std::numeric_limits<double>::infinity()) {
  AdmissibleInterval out;
  out.s_max = s_upper;
  if (const auto* pl = std::get_if<PowerLawEigenvalues>(&model.eigenvalue_law())) {
    out.s_min = 1.0 / pl->q;
    out.basis = AdmissibleBasis::Analytic;
  } else {
    out.basis = AdmissibleBasis::NumericHeuristic;
    const auto& lambda = model.eigenvalues();
    const std::size_t split = (lambda.size() + 1) / 2;
    if (split >= lambda.size()) {
      out.s_min = 0.0;  // single mode: nothing to sum
    } else {
      double lo = 1e-3, hi = 64.0;
      if (!detail::tail_ratio_converged(lambda, hi)) {
        throw ModelValidationError(
            "tail-ratio heuristic found no convergent exponent up to s = 64; "
            "explicit spectrum decays too slowly");
      }
      if (detail::tail_ratio_converged(lambda, lo)) {
        out.s_min = lo;
      } else {
        for (int it = 0; it < 80 && (hi - lo) > 1e-9 * hi; ++it) {
          const double mid = 0.5 * (lo + hi);
          (detail::tail_ratio_converged(lambda, mid) ? hi : lo) = mid;
        }
        out.s_min = hi;
      }
    }
  }
  if (!(s_upper > out.s_min)) {
    throw ModelValidationError("admissible interval is empty: upper bound " +
                               std::to_string(s_upper) + " <= s_min = " +
                               std::to_string(out.s_min));
  }
  return out;
}

// Supremum of exponents below which sum_j mu_j lambda_j^s would stay finite
// if the truncation were removed. Only power-law laws carry asymptotics;
// explicit lists return nullopt (finite data, nothing to extrapolate).
inline std::optional<double> noise_trace_upper_s(const SpectralModel& model) {
  const auto* pl = std::get_if<PowerLawEigenvalues>(&model.eigenvalue_law());
  if (pl == nullptr) return std::nullopt;
  double decay;  // mu_j = lambda_j^{-decay} up to a constant
  if (const auto* md = std::get_if<MatchedDecayCovariance>(&model.covariance_law())) {
    decay = 2.0 * md->s_ref + md->epsilon;
  } else if (const auto* pc = std::get_if<PowerLawCovariance>(&model.covariance_law())) {
    decay = pc->r;
  } else {
    return std::nullopt;
  }
  // sum_j j^{q(s - decay)} < inf  iff  q(s - decay) < -1.
  return decay - 1.0 / pl->q;
}

}  // namespace fracid
