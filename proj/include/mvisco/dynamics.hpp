#pragma once

// Time integration of the coupled magneto-viscoelastic system on (0,1):
//
//   displacement   u_t = u1 + int_0^t G(t-tau) u_xx dtau
//                        + int_0^t (lambda/2) (Lambda(m).m)_x dtau + int_0^t f dtau
//   magnetization  m_t + m (|m|^2 - 1)/delta + lambda Lambda(m) u_x - m_xx = 0
//
// with u = 0 and m_x = 0 on the boundary, u(0) = 0, u_t(0) = u1, m(0) = m0.
// Lambda(m) = (m2, m1).
//
// Three modes are provided: the translated second-order problem (kernel shift
// eps > 0, Stormer-Verlet in u), the evolution form integrated directly
// (kernel may be singular) and the uncoupled viscoelastic equation.

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "mvisco/errors.hpp"
#include "mvisco/field.hpp"
#include "mvisco/kernel.hpp"
#include "mvisco/memory.hpp"
#include "mvisco/tridiagonal.hpp"

namespace mvisco {

using Vec2 = std::array<double, 2>;

/// Lambda(m) = (m2, m1).
constexpr Vec2 lambda_op(const Vec2& m) noexcept { return {m[1], m[0]}; }

/// Lambda(m) . m = 2 m1 m2.
constexpr double lambda_dot(const Vec2& m) noexcept { return 2.0 * m[0] * m[1]; }

/// How the memory term of the second-order problem is evaluated.
enum class MemoryForm {
  Convolution,        // Geps(0) u_xx + int Gdot_eps(t-tau) u_xx(tau) dtau
  HistoryDifference,  // Geps(t) u_xx - int Gdot_eps(s) [u_xx(t) - u_xx(t-s)] ds
};

struct ModelParams {
  double lambda = 0.0;
  double delta = 0.01;
  RelaxationKernel kernel;
  double T = 1.0;
  double dt = 0.0;
  Grid grid;
  MemoryForm memory_form = MemoryForm::Convolution;

  std::size_t n_steps() const noexcept {
    return static_cast<std::size_t>(std::llround(T / dt));
  }
};

/// Validates parameters and rounds dt down so that T is an integer number of steps.
inline ModelParams make_params(double lambda, double delta, RelaxationKernel kernel, double T,
                               double dt, Grid grid,
                               MemoryForm form = MemoryForm::Convolution) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidArgument("lambda must be >= 0");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0,1)");
  if (!(T > 0.0)) throw InvalidArgument("horizon T must be positive");
  if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
  if (grid.n_cells < 4) throw InvalidArgument("grid needs at least 4 cells");
  double steps = T / dt;
  double rounded = std::round(steps);
  if (std::abs(steps - rounded) > 1e-9 * std::max(1.0, steps)) rounded = std::ceil(steps);
  if (rounded < 1.0) rounded = 1.0;
  return ModelParams{lambda, delta, std::move(kernel), T, T / rounded, grid, form};
}

/// Largest stable dt of the explicit displacement update, h / sqrt(Geps(0)).
inline double cfl_limit(const ModelParams& params) {
  return params.grid.h / std::sqrt(params.kernel.eval(0.0));
}

struct RegularEps {};
struct SingularEvolution {};
/// Uncoupled displacement equation with right-hand side F; m stays at m0.
struct ViscoelasticOnly {
  Forcing rhs = ZeroForcing{};
};
using RunMode = std::variant<RegularEps, SingularEvolution, ViscoelasticOnly>;

inline const char* mode_name(const RunMode& mode) {
  if (std::holds_alternative<RegularEps>(mode)) return "regular-eps";
  if (std::holds_alternative<SingularEvolution>(mode)) return "singular-evolution";
  return "viscoelastic-only";
}

inline bool is_coupled(const RunMode& mode) {
  return !std::holds_alternative<ViscoelasticOnly>(mode);
}

// ---------------------------------------------------------------------------
// Magnetization

/// Stabilization constant S of the penalty update. The discrete energy
/// decreases when S >= max eig(F'')/2 = (3|m|^2 - 1)/2, i.e. for |m|^2 <= 5/3.
inline constexpr double kPenaltyStabilization = 2.0;

/// One step of the penalized gradient flow: implicit diffusion with a mirrored
/// Neumann ghost node, stabilized penalty
///   [m_old (|m_old|^2 - 1) + S (m_new - m_old)] / delta
/// and explicit coupling lambda Lambda(m_old) u_x(old).
inline std::pair<Profile, Profile> step_magnetization(const FieldState& state,
                                                      const ModelParams& params) {
  const Grid& grid = params.grid;
  const std::size_t n = grid.n_cells;
  const std::size_t len = grid.n_nodes();
  if (state.m1.size() != len || state.m2.size() != len || state.u.size() != len)
    throw SizeMismatch("state does not match grid");

  const double inv_dt = 1.0 / params.dt;
  const double inv_h2 = 1.0 / (grid.h * grid.h);
  const Profile ux = dx_centered(state.u, grid);

  std::vector<double> lower(len, -inv_h2), upper(len, -inv_h2), diag(len);
  std::vector<double> rhs1(len), rhs2(len);
  for (std::size_t j = 0; j < len; ++j) {
    const double m1 = state.m1[j];
    const double m2 = state.m2[j];
    const double rho = m1 * m1 + m2 * m2 - 1.0;
    const double stab = kPenaltyStabilization / params.delta;
    diag[j] = inv_dt + stab + 2.0 * inv_h2;
    const double keep = inv_dt + stab - rho / params.delta;
    const Vec2 lm = lambda_op({m1, m2});
    rhs1[j] = m1 * keep - params.lambda * lm[0] * ux[j];
    rhs2[j] = m2 * keep - params.lambda * lm[1] * ux[j];
  }
  upper[0] = -2.0 * inv_h2;
  lower[n] = -2.0 * inv_h2;

  return {solve_tridiagonal(lower, diag, upper, rhs1),
          solve_tridiagonal(lower, diag, upper, rhs2)};
}

// ---------------------------------------------------------------------------
// Displacement steppers

namespace detail {

inline Profile magnetic_flux(const Profile& m1, const Profile& m2, double lambda,
                             const Grid& grid) {
  Profile q(m1.size());
  for (std::size_t j = 0; j < q.size(); ++j) q[j] = lambda_dot({m1[j], m2[j]});
  Profile flux = dx_centered(q, grid);
  for (double& x : flux) x *= 0.5 * lambda;
  return flux;
}

inline void clamp_dirichlet(Profile& f) {
  f.front() = 0.0;
  f.back() = 0.0;
}

}  // namespace detail

/// Stormer-Verlet stepping of the second-order translated problem
///   u_tt = Geps(0) u_xx + int Gdot_eps(t-tau) u_xx dtau + (lambda/2)(Lambda(m).m)_x + f.
/// The memory term at t_n uses the history through t_n.
class RegularStepper {
 public:
  RegularStepper(const ModelParams& params, const InitialData& initial, RunMode mode)
      : params_(params),
        mode_(std::move(mode)),
        plan_(ConvolutionPlan::for_derivative(params.kernel, params.dt, params.n_steps() + 1)),
        history_(params.dt, params.grid.n_nodes()) {
    if (std::holds_alternative<SingularEvolution>(mode_))
      throw ModeMismatch("regular stepper cannot run the evolution form");
    if (params.dt > cfl_limit(params) * (1.0 + 1e-12))
      throw CflViolation("dt exceeds h / sqrt(Geps(0))");
    forcing_ = std::holds_alternative<ViscoelasticOnly>(mode_)
                   ? std::get<ViscoelasticOnly>(mode_).rhs
                   : initial.forcing;
    state_.t = 0.0;
    state_.u.assign(params.grid.n_nodes(), 0.0);
    state_.v = initial.u1;
    detail::clamp_dirichlet(state_.v);
    state_.m1 = initial.m0_1;
    state_.m2 = initial.m0_2;
    history_.append(Profile(params.grid.n_nodes(), 0.0));
    accel_ = acceleration(0);
  }

  const FieldState& state() const noexcept { return state_; }
  const History& history() const noexcept { return history_; }
  std::size_t level() const noexcept { return level_; }

  const FieldState& step() {
    const ModelParams& p = params_;
    const double dt = p.dt;
    if (is_coupled(mode_)) {
      auto [m1, m2] = step_magnetization(state_, p);
      state_.m1 = std::move(m1);
      state_.m2 = std::move(m2);
    }
    const std::size_t len = state_.u.size();
    for (std::size_t j = 0; j < len; ++j) {
      state_.v[j] += 0.5 * dt * accel_[j];
      state_.u[j] += dt * state_.v[j];
    }
    detail::clamp_dirichlet(state_.u);
    ++level_;
    state_.t = static_cast<double>(level_) * dt;
    history_.append(dxx(state_.u, p.grid, Boundary::Dirichlet));
    accel_ = acceleration(level_);
    for (std::size_t j = 0; j < len; ++j) state_.v[j] += 0.5 * dt * accel_[j];
    detail::clamp_dirichlet(state_.v);
    return state_;
  }

 private:
  Profile acceleration(std::size_t n) const {
    const ModelParams& p = params_;
    const double t = static_cast<double>(n) * p.dt;
    const Profile& uxx = history_.level(n);
    Profile a;
    if (p.memory_form == MemoryForm::Convolution) {
      a = convolve_dotG(history_, plan_, n);
      const double g0 = p.kernel.eval(0.0);
      for (std::size_t j = 0; j < a.size(); ++j) a[j] += g0 * uxx[j];
    } else {
      a = history_difference_form(history_, plan_, n);
      const double gt = p.kernel.eval(t);
      for (std::size_t j = 0; j < a.size(); ++j) a[j] = gt * uxx[j] - a[j];
    }
    if (is_coupled(mode_) && p.lambda != 0.0) {
      const Profile flux = detail::magnetic_flux(state_.m1, state_.m2, p.lambda, p.grid);
      for (std::size_t j = 0; j < a.size(); ++j) a[j] += flux[j];
    }
    if (!is_zero(forcing_)) {
      const Profile f = sample_forcing(forcing_, p.grid, t);
      for (std::size_t j = 0; j < a.size(); ++j) a[j] += f[j];
    }
    detail::clamp_dirichlet(a);
    return a;
  }

  ModelParams params_;
  RunMode mode_;
  Forcing forcing_;
  ConvolutionPlan plan_;
  History history_;
  FieldState state_;
  Profile accel_;
  std::size_t level_ = 0;
};

/// Direct integration of the evolution form. The velocity is
///   v(t_{n+1}) = u1 + int G u_xx + int flux + int f
/// with the memory integral product-integrated (exact moments of G, so the
/// weakly singular head interval is handled analytically) and u advanced by
/// the trapezoid rule. The head-interval weight on u_xx(t_{n+1}) is taken
/// implicitly, which turns the update into one tridiagonal solve.
class SingularStepper {
 public:
  SingularStepper(const ModelParams& params, const InitialData& initial, RunMode mode)
      : params_(params),
        mode_(std::move(mode)),
        plan_(ConvolutionPlan::for_kernel(params.kernel, params.dt, params.n_steps() + 1)),
        history_(params.dt, params.grid.n_nodes()) {
    if (std::holds_alternative<RegularEps>(mode_))
      throw ModeMismatch("singular stepper cannot run the second-order form");
    forcing_ = std::holds_alternative<ViscoelasticOnly>(mode_)
                   ? std::get<ViscoelasticOnly>(mode_).rhs
                   : initial.forcing;
    const std::size_t len = params.grid.n_nodes();
    u1_ = initial.u1;
    detail::clamp_dirichlet(u1_);
    state_.t = 0.0;
    state_.u.assign(len, 0.0);
    state_.v = u1_;
    state_.m1 = initial.m0_1;
    state_.m2 = initial.m0_2;
    history_.append(Profile(len, 0.0));
    integrated_.assign(len, 0.0);
    rate_ = source_rate(0);
  }

  const FieldState& state() const noexcept { return state_; }
  const History& history() const noexcept { return history_; }
  std::size_t level() const noexcept { return level_; }

  const FieldState& step() {
    const ModelParams& p = params_;
    const Grid& grid = p.grid;
    const double dt = p.dt;
    const std::size_t len = grid.n_nodes();
    const std::size_t n = grid.n_cells;

    if (is_coupled(mode_)) {
      auto [m1, m2] = step_magnetization(state_, p);
      state_.m1 = std::move(m1);
      state_.m2 = std::move(m2);
    }
    const std::size_t next = level_ + 1;
    const Profile rate_next = source_rate(next);
    for (std::size_t j = 0; j < len; ++j) integrated_[j] += 0.5 * dt * (rate_[j] + rate_next[j]);
    rate_ = rate_next;

    Profile known = convolve_G_without_newest(history_, plan_, next);
    for (std::size_t j = 0; j < len; ++j) known[j] += u1_[j] + integrated_[j];

    // (I - (dt/2) W D2) u_new = u + (dt/2)(v + known), interior nodes only.
    const double w = plan_.newest_weight();
    const double c = 0.5 * dt * w / (grid.h * grid.h);
    const std::size_t m = n - 1;
    std::vector<double> lower(m, -c), diag(m, 1.0 + 2.0 * c), upper(m, -c), rhs(m);
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t j = i + 1;
      rhs[i] = state_.u[j] + 0.5 * dt * (state_.v[j] + known[j]);
    }
    const std::vector<double> interior = solve_tridiagonal(lower, diag, upper, rhs);
    for (std::size_t i = 0; i < m; ++i) state_.u[i + 1] = interior[i];
    detail::clamp_dirichlet(state_.u);

    Profile uxx = dxx(state_.u, grid, Boundary::Dirichlet);
    for (std::size_t j = 0; j < len; ++j) state_.v[j] = known[j] + w * uxx[j];
    detail::clamp_dirichlet(state_.v);
    history_.append(std::move(uxx));

    level_ = next;
    state_.t = static_cast<double>(level_) * dt;
    return state_;
  }

 private:
  // Integrand of the accumulated source terms: (lambda/2)(Lambda(m).m)_x + f.
  Profile source_rate(std::size_t n) const {
    const ModelParams& p = params_;
    Profile r(p.grid.n_nodes(), 0.0);
    if (is_coupled(mode_) && p.lambda != 0.0)
      r = detail::magnetic_flux(state_.m1, state_.m2, p.lambda, p.grid);
    if (!is_zero(forcing_)) {
      const Profile f = sample_forcing(forcing_, p.grid, static_cast<double>(n) * p.dt);
      for (std::size_t j = 0; j < r.size(); ++j) r[j] += f[j];
    }
    return r;
  }

  ModelParams params_;
  RunMode mode_;
  Forcing forcing_;
  ConvolutionPlan plan_;
  History history_;
  FieldState state_;
  Profile u1_;
  Profile integrated_;
  Profile rate_;
  std::size_t level_ = 0;
};

/// One step of the translated second-order problem.
inline const FieldState& step_coupled_eps(RegularStepper& stepper) { return stepper.step(); }

/// One step of the evolution form.
inline const FieldState& step_evolution_singular(SingularStepper& stepper) {
  return stepper.step();
}

struct Trajectory {
  std::vector<FieldState> states;
  ModelParams params;
  RunMode mode;
  InitialData initial;
  History history;

  double dt() const noexcept { return params.dt; }
  const Grid& grid() const noexcept { return params.grid; }
  std::size_t n_levels() const noexcept { return states.size(); }

  /// Right-hand side driving the displacement equation (f, or F in
  /// viscoelastic-only mode) at level n.
  Profile forcing_at(std::size_t n) const {
    const Forcing& f = std::holds_alternative<ViscoelasticOnly>(mode)
                           ? std::get<ViscoelasticOnly>(mode).rhs
                           : initial.forcing;
    return sample_forcing(f, params.grid, static_cast<double>(n) * params.dt);
  }
};

using StepObserver = std::function<void(const FieldState&, std::size_t level)>;

/// Integrates to params.T. ViscoelasticOnly uses the second-order stepper when
/// the kernel is regular at the origin and the evolution form otherwise.
inline Trajectory run(const InitialData& initial, const ModelParams& params, const RunMode& mode,
                      const StepObserver& observer = {}) {
  if (initial.u1.size() != params.grid.n_nodes() || initial.m0_1.size() != params.grid.n_nodes())
    throw SizeMismatch("initial data does not match grid");

  Trajectory traj{{}, params, mode, initial, {}};
  const std::size_t steps = params.n_steps();
  traj.states.reserve(steps + 1);

  auto drive = [&](auto& stepper) {
    traj.states.push_back(stepper.state());
    if (observer) observer(stepper.state(), 0);
    for (std::size_t k = 0; k < steps; ++k) {
      traj.states.push_back(stepper.step());
      if (observer) observer(traj.states.back(), k + 1);
    }
    traj.history = stepper.history();
  };

  const bool second_order = std::holds_alternative<RegularEps>(mode) ||
                            (std::holds_alternative<ViscoelasticOnly>(mode) &&
                             !params.kernel.singular_at_origin());
  if (second_order) {
    RegularStepper stepper(params, initial, mode);
    drive(stepper);
  } else {
    SingularStepper stepper(params, initial, mode);
    drive(stepper);
  }
  return traj;
}

}  // namespace mvisco
