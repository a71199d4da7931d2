#pragma once

// Deformation history and product-integration of the memory convolutions
//
//   int_0^t  G(t - tau)    w(tau) dtau        (evolution form)
//   int_0^t  Gdot_eps(t - tau) w(tau) dtau    (second-order form)
//
// w is reconstructed piecewise linearly between stored levels and integrated
// exactly against the kernel factor on every lag interval [j dt, (j+1) dt].

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "mvisco/errors.hpp"
#include "mvisco/field.hpp"
#include "mvisco/kernel.hpp"

namespace mvisco {

/// Append-only record of node profiles; level k lives at t = k * dt.
class History {
 public:
  History() = default;
  History(double dt, std::size_t profile_length) : dt_(dt), length_(profile_length) {
    if (!(dt > 0.0)) throw InvalidArgument("history time step must be positive");
  }

  double dt() const noexcept { return dt_; }
  std::size_t profile_length() const noexcept { return length_; }
  std::size_t size() const noexcept { return levels_.size(); }
  bool empty() const noexcept { return levels_.empty(); }

  void append(Profile profile) {
    if (profile.size() != length_) throw SizeMismatch("history profile length mismatch");
    levels_.push_back(std::move(profile));
  }

  const Profile& level(std::size_t k) const { return levels_.at(k); }
  const std::vector<Profile>& levels() const noexcept { return levels_; }

 private:
  double dt_ = 0.0;
  std::size_t length_ = 0;
  std::vector<Profile> levels_;
};

enum class KernelFactor { Value, Derivative };

struct LagMoments {
  double m0 = 0.0;  // int_{j dt}^{(j+1) dt} K(s) ds
  double m1 = 0.0;  // int_{j dt}^{(j+1) dt} (s - j dt) K(s) ds
};

/// Precomputed per-lag moments of either G_eps or Gdot_eps.
class ConvolutionPlan {
 public:
  /// Weights for int_0^t G(t - tau) w(tau) dtau over lags [0, n_lags * dt].
  static ConvolutionPlan for_kernel(const RelaxationKernel& kernel, double dt,
                                    std::size_t n_lags) {
    ConvolutionPlan plan(kernel, dt, KernelFactor::Value);
    plan.lags_.reserve(n_lags);
    for (std::size_t j = 0; j < n_lags; ++j) {
      const double a = static_cast<double>(j) * dt;
      const double b = static_cast<double>(j + 1) * dt;
      plan.lags_.push_back({kernel.moment0(a, b), kernel.moment1(a, b)});
    }
    return plan;
  }

  /// Weights for int_0^t Gdot_eps(t - tau) w(tau) dtau. The moments follow
  /// from those of G: int Gdot = G(b) - G(a), int (s-a) Gdot = h G(b) - int G.
  static ConvolutionPlan for_derivative(const RelaxationKernel& kernel, double dt,
                                        std::size_t n_lags) {
    if (kernel.singular_at_origin())
      throw SingularDerivative("derivative convolution needs a kernel regular at the origin");
    ConvolutionPlan plan(kernel, dt, KernelFactor::Derivative);
    plan.lags_.reserve(n_lags);
    plan.samples_.reserve(n_lags + 1);
    double g_left = kernel.eval(0.0);
    plan.samples_.push_back(kernel.eval_dot(0.0));
    for (std::size_t j = 0; j < n_lags; ++j) {
      const double a = static_cast<double>(j) * dt;
      const double b = static_cast<double>(j + 1) * dt;
      const double g_right = kernel.eval(b);
      plan.lags_.push_back({g_right - g_left, (b - a) * g_right - kernel.moment0(a, b)});
      plan.samples_.push_back(kernel.eval_dot(b));
      g_left = g_right;
    }
    return plan;
  }

  const RelaxationKernel& kernel() const noexcept { return kernel_; }
  double dt() const noexcept { return dt_; }
  KernelFactor factor() const noexcept { return factor_; }
  std::size_t n_lags() const noexcept { return lags_.size(); }
  const LagMoments& lag(std::size_t j) const { return lags_.at(j); }

  /// Weight multiplying the newest level w_n in the convolution at t_n.
  double newest_weight() const {
    if (lags_.empty()) throw PlanMismatch("plan has no lags");
    return lags_[0].m0 - lags_[0].m1 / dt_;
  }

  /// Pointwise Gdot_eps(j dt); only for derivative plans.
  double derivative_sample(std::size_t j) const { return samples_.at(j); }

 private:
  ConvolutionPlan(const RelaxationKernel& kernel, double dt, KernelFactor factor)
      : kernel_(kernel), dt_(dt), factor_(factor) {
    if (!(dt > 0.0)) throw InvalidArgument("plan time step must be positive");
  }

  RelaxationKernel kernel_;
  double dt_ = 0.0;
  KernelFactor factor_ = KernelFactor::Value;
  std::vector<LagMoments> lags_;
  std::vector<double> samples_;
};

namespace detail {

inline void check_plan(const History& history, const ConvolutionPlan& plan, std::size_t n,
                       std::size_t levels_needed) {
  if (plan.dt() != history.dt()) throw PlanMismatch("plan and history disagree on dt");
  if (n > plan.n_lags()) throw PlanMismatch("plan has too few lags for the requested level");
  if (history.size() < levels_needed)
    throw PlanMismatch("history does not reach the requested level");
}

// Sum over lag intervals j = first_lag..n-1 of the exact integral of the
// linear interpolant of w against the plan's kernel factor. When
// skip_newest is set, the contribution of w_n is omitted (w_n may be absent).
inline Profile product_integrate(const History& history, const ConvolutionPlan& plan,
                                 std::size_t n, bool skip_newest) {
  Profile out(history.profile_length(), 0.0);
  const double inv_dt = 1.0 / plan.dt();
  const std::size_t len = out.size();
  for (std::size_t j = 0; j < n; ++j) {
    const LagMoments& w = plan.lag(j);
    const double near = w.m0 - w.m1 * inv_dt;  // weight on w_{n-j}
    const double far = w.m1 * inv_dt;          // weight on w_{n-j-1}
    const Profile& older = history.level(n - j - 1);
    if (!(skip_newest && j == 0)) {
      const Profile& newer = history.level(n - j);
      for (std::size_t i = 0; i < len; ++i) out[i] += near * newer[i];
    }
    for (std::size_t i = 0; i < len; ++i) out[i] += far * older[i];
  }
  return out;
}

}  // namespace detail

/// int_0^{t_n} G(t_n - tau) w(tau) dtau with t_n = n dt.
inline Profile convolve_G(const History& history, const ConvolutionPlan& plan, std::size_t n) {
  if (plan.factor() != KernelFactor::Value) throw PlanMismatch("expected a kernel-value plan");
  detail::check_plan(history, plan, n, n + 1);
  return detail::product_integrate(history, plan, n, false);
}

/// Same as convolve_G but with w_n not yet known: returns the convolution
/// minus plan.newest_weight() * w_n. History must hold levels 0..n-1.
inline Profile convolve_G_without_newest(const History& history, const ConvolutionPlan& plan,
                                         std::size_t n) {
  if (plan.factor() != KernelFactor::Value) throw PlanMismatch("expected a kernel-value plan");
  if (n == 0) return Profile(history.profile_length(), 0.0);
  detail::check_plan(history, plan, n, n);
  return detail::product_integrate(history, plan, n, true);
}

/// int_0^{t_n} Gdot_eps(t_n - tau) w(tau) dtau.
inline Profile convolve_dotG(const History& history, const ConvolutionPlan& plan, std::size_t n) {
  if (plan.factor() != KernelFactor::Derivative)
    throw PlanMismatch("expected a kernel-derivative plan");
  detail::check_plan(history, plan, n, n + 1);
  return detail::product_integrate(history, plan, n, false);
}

/// int_0^{t_n} Gdot_eps(s) [w(t_n) - w(t_n - s)] ds by the composite
/// trapezoid rule on the pointwise integrand, which vanishes at s = 0.
inline Profile history_difference_form(const History& history, const ConvolutionPlan& plan,
                                       std::size_t n) {
  if (plan.factor() != KernelFactor::Derivative)
    throw PlanMismatch("expected a kernel-derivative plan");
  detail::check_plan(history, plan, n, n + 1);
  Profile out(history.profile_length(), 0.0);
  if (n == 0) return out;
  const Profile& newest = history.level(n);
  const std::size_t len = out.size();
  for (std::size_t j = 1; j <= n; ++j) {
    const double w = plan.derivative_sample(j) * plan.dt() * (j == n ? 0.5 : 1.0);
    const Profile& past = history.level(n - j);
    for (std::size_t i = 0; i < len; ++i) out[i] += w * (newest[i] - past[i]);
  }
  return out;
}

}  // namespace mvisco
