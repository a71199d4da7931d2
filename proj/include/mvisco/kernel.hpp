#pragma once

// Relaxation kernels G(t) for the viscoelastic memory term.
//
// Three admissible families are supported:
//   Fractional   G(s) = scale * s^(-alpha) / Gamma(1 - alpha),  0 < alpha < 1
//   PronySeries  G(s) = sum_i c_i exp(-r_i s)
//   Constant     G(s) = c
// A kernel may be translated by a shift eps >= 0, giving G_eps(t) = G(t + eps).
// Interval moments are evaluated in closed form so that the weakly singular
// head of a convolution can be integrated exactly.

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "mvisco/errors.hpp"

namespace mvisco {

struct Fractional {
  double alpha = 0.5;
  double scale = 1.0;
  bool operator==(const Fractional&) const = default;
};

struct PronyTerm {
  double coefficient = 0.0;
  double rate = 0.0;
  bool operator==(const PronyTerm&) const = default;
};

struct PronySeries {
  std::vector<PronyTerm> terms;
  bool operator==(const PronySeries&) const = default;
};

struct Constant {
  double value = 1.0;
  bool operator==(const Constant&) const = default;
};

namespace detail {
/// Un-normalized power law scale * s^(-exponent). Not admissible through
/// make_kernel; used to exercise validation failure paths.
struct PowerLaw {
  double exponent = 1.5;
  double scale = 1.0;
  bool operator==(const PowerLaw&) const = default;
};
}  // namespace detail

using KernelFamily = std::variant<Fractional, PronySeries, Constant, detail::PowerLaw>;

struct KernelSpec {
  KernelFamily family = Constant{};
  bool operator==(const KernelSpec&) const = default;
};

inline std::string family_name(const KernelSpec& spec) {
  return std::visit(
      [](const auto& f) -> std::string {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, Fractional>) return "fractional";
        else if constexpr (std::is_same_v<F, PronySeries>) return "prony";
        else if constexpr (std::is_same_v<F, Constant>) return "constant";
        else return "power-law";
      },
      spec.family);
}

/// Throws InvalidSpec if the spec is outside its admissible range.
inline void check_spec(const KernelSpec& spec) {
  std::visit(
      [](const auto& f) {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, Fractional>) {
          if (!(f.alpha > 0.0 && f.alpha < 1.0))
            throw InvalidSpec("alpha must lie in (0,1)");
          if (!(f.scale > 0.0)) throw InvalidSpec("scale must be positive");
        } else if constexpr (std::is_same_v<F, PronySeries>) {
          bool any_positive = false;
          for (const auto& t : f.terms) {
            if (!(t.coefficient >= 0.0)) throw InvalidSpec("prony coefficients must be >= 0");
            if (!(t.rate >= 0.0)) throw InvalidSpec("prony rates must be >= 0");
            any_positive = any_positive || t.coefficient > 0.0;
          }
          if (!any_positive) throw InvalidSpec("prony series needs a positive coefficient");
        } else if constexpr (std::is_same_v<F, Constant>) {
          if (!(f.value > 0.0)) throw InvalidSpec("constant kernel value must be positive");
        } else {
          throw InvalidSpec("power-law family is reserved for validation testing");
        }
      },
      spec.family);
}

namespace detail {

// ((A(1+x))^q - A^q) / q, with the q -> 0 limit A-independent log1p(x).
inline double power_increment_over(double q, double A, double x) {
  if (q == 0.0) return std::log1p(x);
  return std::pow(A, q) * std::expm1(q * std::log1p(x)) / q;
}

// int_0^1 y exp(-z y) dy
inline double exp_first_moment(double z) {
  if (std::abs(z) < 0.1) {
    double sum = 0.0;
    double term = 1.0;  // (-z)^k / k!
    for (int k = 0; k < 30; ++k) {
      sum += term / (k + 2);
      term *= -z / (k + 1);
    }
    return sum;
  }
  return (1.0 - std::exp(-z) * (1.0 + z)) / (z * z);
}

// int_0^1 exp(-z y) dy
inline double exp_zeroth_moment(double z) {
  if (z == 0.0) return 1.0;
  return -std::expm1(-z) / z;
}

}  // namespace detail

/// A relaxation function together with its time translation.
/// Immutable; every member is a pure function of (spec, shift).
class RelaxationKernel {
 public:
  RelaxationKernel() = default;

  const KernelSpec& spec() const noexcept { return spec_; }
  double shift() const noexcept { return shift_; }

  /// True when G(t) is unbounded as t -> 0 for this shift.
  bool singular_at_origin() const noexcept {
    return shift_ == 0.0 && power_exponent() > 0.0;
  }

  double eval(double t) const { return evaluate<0>(t); }
  double eval_dot(double t) const { return evaluate<1>(t); }
  double eval_ddot(double t) const { return evaluate<2>(t); }

  /// int_a^b G(s + shift) ds
  double moment0(double a, double b) const {
    check_interval(a, b);
    const double h = b - a;
    const double A = a + shift_;
    return std::visit(
        [&](const auto& f) -> double {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, Constant>) {
            return f.value * h;
          } else if constexpr (std::is_same_v<F, PronySeries>) {
            double sum = 0.0;
            for (const auto& t : f.terms)
              sum += t.coefficient * std::exp(-t.rate * A) * h *
                     detail::exp_zeroth_moment(t.rate * h);
            return sum;
          } else {
            const double p = power_exponent();
            const double c = power_coefficient();
            if (A == 0.0) {
              if (p >= 1.0) throw NotIntegrable("kernel is not integrable at the origin");
              return c * std::pow(h, 1.0 - p) / (1.0 - p);
            }
            return c * detail::power_increment_over(1.0 - p, A, h / A);
          }
        },
        spec_.family);
  }

  /// int_a^b (s - a) G(s + shift) ds
  double moment1(double a, double b) const {
    check_interval(a, b);
    const double h = b - a;
    const double A = a + shift_;
    return std::visit(
        [&](const auto& f) -> double {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, Constant>) {
            return f.value * h * h / 2.0;
          } else if constexpr (std::is_same_v<F, PronySeries>) {
            double sum = 0.0;
            for (const auto& t : f.terms)
              sum += t.coefficient * std::exp(-t.rate * A) * h * h *
                     detail::exp_first_moment(t.rate * h);
            return sum;
          } else {
            const double p = power_exponent();
            const double c = power_coefficient();
            if (A == 0.0) {
              if (p >= 2.0) throw NotIntegrable("first moment diverges at the origin");
              return c * std::pow(h, 2.0 - p) / (2.0 - p);
            }
            const double x = h / A;
            if (x <= 0.25) {
              // Binomial series of (1+y/A)^(-p) integrated against y.
              double sum = 0.0;
              double binom = 1.0;
              double xk = 1.0;
              for (int k = 0; k < 64; ++k) {
                const double term = binom * xk / (k + 2);
                sum += term;
                if (std::abs(term) < 1e-18 * std::abs(sum)) break;
                binom *= (-p - k) / (k + 1);
                xk *= x;
              }
              return c * std::pow(A, -p) * h * h * sum;
            }
            // int_0^h (A+y)^(1-p) - A (A+y)^(-p) dy
            return c * (detail::power_increment_over(2.0 - p, A, x) -
                        A * detail::power_increment_over(1.0 - p, A, x));
          }
        },
        spec_.family);
  }

  friend RelaxationKernel make_kernel(const KernelSpec& spec, double epsilon_shift);
  friend RelaxationKernel make_kernel_unchecked(const KernelSpec& spec, double epsilon_shift);

 private:
  RelaxationKernel(KernelSpec spec, double shift) : spec_(std::move(spec)), shift_(shift) {}

  // Exponent p of a power-type family G = c s^-p; zero for regular families.
  double power_exponent() const noexcept {
    if (const auto* f = std::get_if<Fractional>(&spec_.family)) return f->alpha;
    if (const auto* f = std::get_if<detail::PowerLaw>(&spec_.family)) return f->exponent;
    return 0.0;
  }

  double power_coefficient() const noexcept {
    if (const auto* f = std::get_if<Fractional>(&spec_.family))
      return f->scale / std::tgamma(1.0 - f->alpha);
    if (const auto* f = std::get_if<detail::PowerLaw>(&spec_.family)) return f->scale;
    return 0.0;
  }

  void check_interval(double a, double b) const {
    if (!(a >= 0.0 && b > a)) throw InvalidArgument("moment interval requires 0 <= a < b");
  }

  template <int Order>
  double evaluate(double t) const {
    if (!(t >= 0.0)) throw InvalidArgument("kernel evaluated at negative time");
    const double s = t + shift_;
    return std::visit(
        [&](const auto& f) -> double {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, Constant>) {
            return Order == 0 ? f.value : 0.0;
          } else if constexpr (std::is_same_v<F, PronySeries>) {
            double sum = 0.0;
            for (const auto& term : f.terms) {
              const double e = term.coefficient * std::exp(-term.rate * s);
              if constexpr (Order == 0) sum += e;
              else if constexpr (Order == 1) sum -= term.rate * e;
              else sum += term.rate * term.rate * e;
            }
            return sum;
          } else {
            if (s == 0.0) throw EvalAtSingularity("kernel is singular at the origin");
            const double p = power_exponent();
            const double c = power_coefficient();
            if constexpr (Order == 0) return c * std::pow(s, -p);
            else if constexpr (Order == 1) return -p * c * std::pow(s, -p - 1.0);
            else return p * (p + 1.0) * c * std::pow(s, -p - 2.0);
          }
        },
        spec_.family);
  }

  KernelSpec spec_{};
  double shift_ = 0.0;
};

/// Validated construction of G_eps(t) = G(t + epsilon_shift).
inline RelaxationKernel make_kernel(const KernelSpec& spec, double epsilon_shift) {
  check_spec(spec);
  if (!(epsilon_shift >= 0.0) || !std::isfinite(epsilon_shift))
    throw InvalidSpec("epsilon_shift must be >= 0");
  return RelaxationKernel(spec, epsilon_shift);
}

/// Skips admissibility checks. Test use only.
inline RelaxationKernel make_kernel_unchecked(const KernelSpec& spec, double epsilon_shift) {
  return RelaxationKernel(spec, epsilon_shift);
}

struct SignViolation {
  double t = 0.0;
  std::string condition;  // "G>0", "Gdot<=0" or "Gddot>=0"
};

struct KernelValidationReport {
  bool integrable_on_0T = false;
  std::vector<SignViolation> sign_violations;
  double t_min = 0.0;
  double t_max = 0.0;
  std::size_t sample_count = 0;

  bool ok() const noexcept { return integrable_on_0T && sign_violations.empty(); }
};

/// Samples the sign conditions G > 0, Gdot <= 0, Gddot >= 0 at log-spaced
/// points in [horizon * 1e-8, horizon] and checks int_0^horizon G < inf.
inline KernelValidationReport validate(const RelaxationKernel& kernel, double horizon,
                                       std::size_t samples) {
  if (!(horizon > 0.0)) throw InvalidArgument("validation horizon must be positive");
  if (samples < 2) throw InvalidArgument("validation needs at least two samples");

  constexpr double kDecades = 8.0;
  KernelValidationReport report;
  report.t_min = horizon * std::pow(10.0, -kDecades);
  report.t_max = horizon;
  report.sample_count = samples;

  for (std::size_t i = 0; i < samples; ++i) {
    const double frac = static_cast<double>(i) / static_cast<double>(samples - 1);
    const double t = i + 1 == samples ? horizon
                                      : horizon * std::pow(10.0, -kDecades * (1.0 - frac));
    if (!(kernel.eval(t) > 0.0)) report.sign_violations.push_back({t, "G>0"});
    if (!(kernel.eval_dot(t) <= 0.0)) report.sign_violations.push_back({t, "Gdot<=0"});
    if (!(kernel.eval_ddot(t) >= 0.0)) report.sign_violations.push_back({t, "Gddot>=0"});
  }

  try {
    report.integrable_on_0T = std::isfinite(kernel.moment0(0.0, horizon));
  } catch (const NotIntegrable&) {
    report.integrable_on_0T = false;
  }
  return report;
}

}  // namespace mvisco
