#pragma once

// Energy bookkeeping, discrete checks of the a priori inequalities and the
// space-time weak-form residual of a computed trajectory.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "mvisco/dynamics.hpp"
#include "mvisco/errors.hpp"
#include "mvisco/field.hpp"
#include "mvisco/memory.hpp"

namespace mvisco {

/// K in the inequality tolerance K (h^2 + dt). Fixed from the constant-kernel
/// wave run at N = 200, dt = h/2 (see tests/test_diagnostics.cpp).
inline constexpr double kMonitorConstant = 2e-3;

inline double monitor_tolerance(double h, double dt) { return kMonitorConstant * (h * h + dt); }

struct EnergyEntry {
  double t = 0.0;
  double kinetic = 0.0;          // 1/2 int |u_t|^2
  double elastic = 0.0;          // 1/2 int G(t+eps) |u_x|^2
  double elastic_quarter = 0.0;  // 1/4 int G(t+eps) |u_x|^2
  double exchange = 0.0;         // 1/2 int |m_x|^2
  double penalty = 0.0;          // 1/4 int (|m|^2-1)^2 / delta
  double penalty_eighth = 0.0;   // 1/8 int (|m|^2-1)^2 / delta
  double coupling = 0.0;         // lambda/2 int Lambda(m).m u_x (signed)
  double dissipation = 0.0;      // int_0^t int |m_t|^2
  double work = 0.0;             // int_0^t int f u_t
  double total = 0.0;            // E(t)
};

using EnergyReport = std::vector<EnergyEntry>;

namespace detail {

inline double penalty_integral(const FieldState& s, double delta, const Grid& grid) {
  Profile rho(s.m1.size());
  for (std::size_t j = 0; j < rho.size(); ++j)
    rho[j] = s.m1[j] * s.m1[j] + s.m2[j] * s.m2[j] - 1.0;
  return l2_norm_sq(rho, grid) / delta;
}

// G(t + eps) int |u_x|^2, taking the value 0 where the kernel is singular
// (only at t = 0, where u = 0).
inline double weighted_strain(const Trajectory& traj, std::size_t n, double ux_sq) {
  const double t = traj.states[n].t;
  if (ux_sq == 0.0) return 0.0;
  if (t == 0.0 && traj.params.kernel.singular_at_origin()) return 0.0;
  return traj.params.kernel.eval(t) * ux_sq;
}

inline double magnetization_rate_sq(const FieldState& a, const FieldState& b, double dt,
                                    const Grid& grid) {
  Profile d1(a.m1.size()), d2(a.m1.size());
  for (std::size_t j = 0; j < d1.size(); ++j) {
    d1[j] = (b.m1[j] - a.m1[j]) / dt;
    d2[j] = (b.m2[j] - a.m2[j]) / dt;
  }
  return l2_norm_sq(d1, grid) + l2_norm_sq(d2, grid);
}

inline double coupling_integral(const FieldState& s, const Grid& grid) {
  const Profile ux = dx_centered(s.u, grid);
  Profile q(ux.size());
  for (std::size_t j = 0; j < q.size(); ++j) q[j] = lambda_dot({s.m1[j], s.m2[j]});
  return l2_inner(q, ux, grid);
}

}  // namespace detail

/// Energy terms at every level (cumulative terms need the whole prefix).
inline EnergyReport energy_report(const Trajectory& traj) {
  const Grid& grid = traj.grid();
  const double dt = traj.dt();
  const bool coupled = is_coupled(traj.mode);
  EnergyReport report;
  report.reserve(traj.n_levels());
  double dissipation = 0.0;
  double work = 0.0;
  Profile f_prev;
  for (std::size_t n = 0; n < traj.n_levels(); ++n) {
    const FieldState& s = traj.states[n];
    EnergyEntry e;
    e.t = s.t;
    e.kinetic = 0.5 * l2_norm_sq(s.v, grid);
    const double strain = detail::weighted_strain(traj, n, gradient_norm_sq(s.u, grid));
    e.elastic = 0.5 * strain;
    e.elastic_quarter = 0.25 * strain;
    e.exchange = 0.5 * (gradient_norm_sq(s.m1, grid) + gradient_norm_sq(s.m2, grid));
    const double pen = detail::penalty_integral(s, traj.params.delta, grid);
    e.penalty = 0.25 * pen;
    e.penalty_eighth = 0.125 * pen;
    e.coupling = coupled ? 0.5 * traj.params.lambda * detail::coupling_integral(s, grid) : 0.0;

    const Profile f = traj.forcing_at(n);
    if (n > 0) {
      dissipation += dt * detail::magnetization_rate_sq(traj.states[n - 1], s, dt, grid);
      work += 0.5 * dt * (l2_inner(f_prev, traj.states[n - 1].v, grid) + l2_inner(f, s.v, grid));
    }
    f_prev = f;
    e.dissipation = dissipation;
    e.work = work;
    e.total = e.elastic_quarter + e.kinetic + e.exchange + e.penalty_eighth;
    report.push_back(e);
  }
  return report;
}

/// Energy terms at one level.
inline EnergyEntry energy(const Trajectory& traj, std::size_t level) {
  if (level >= traj.n_levels()) throw InvalidArgument("level outside trajectory");
  Trajectory prefix{{traj.states.begin(), traj.states.begin() + static_cast<long>(level) + 1},
                    traj.params, traj.mode, traj.initial, {}};
  return energy_report(prefix).back();
}

struct InequalityReport {
  std::vector<double> residuals;  // LHS - RHS per level
  double max_residual = 0.0;      // max over levels, at least 0
  double tolerance = 0.0;
  bool pass = false;
};

namespace detail {
inline InequalityReport finish_report(std::vector<double> residuals, const Trajectory& traj) {
  InequalityReport r;
  r.residuals = std::move(residuals);
  r.max_residual = 0.0;
  for (double x : r.residuals) r.max_residual = std::max(r.max_residual, x);
  r.tolerance = monitor_tolerance(traj.grid().h, traj.dt());
  r.pass = r.max_residual <= r.tolerance;
  return r;
}
}  // namespace detail

/// Viscoelastic energy inequality
///   1/2 int G(t+eps)|u_x|^2 + 1/2 int |u_t|^2 <= 1/2 int |u1|^2 + int_0^t int F u_t
/// with F = f in viscoelastic-only runs and F = f + (lambda/2)(Lambda(m).m)_x
/// in coupled runs. The G(eps)|u_x(0)|^2 term vanishes because u(0) = 0.
inline InequalityReport check_lemma21(const Trajectory& traj) {
  const Grid& grid = traj.grid();
  const double dt = traj.dt();
  const bool coupled = is_coupled(traj.mode);
  const double initial = 0.5 * l2_norm_sq(traj.states.front().v, grid);
  std::vector<double> residuals;
  residuals.reserve(traj.n_levels());
  double work = 0.0;
  Profile rate_prev;
  for (std::size_t n = 0; n < traj.n_levels(); ++n) {
    const FieldState& s = traj.states[n];
    Profile rate = traj.forcing_at(n);
    if (coupled && traj.params.lambda != 0.0) {
      const Profile flux = detail::magnetic_flux(s.m1, s.m2, traj.params.lambda, grid);
      for (std::size_t j = 0; j < rate.size(); ++j) rate[j] += flux[j];
    }
    if (n > 0)
      work += 0.5 * dt * (l2_inner(rate_prev, traj.states[n - 1].v, grid) +
                          l2_inner(rate, s.v, grid));
    rate_prev = std::move(rate);
    const double lhs = 0.5 * detail::weighted_strain(traj, n, gradient_norm_sq(s.u, grid)) +
                       0.5 * l2_norm_sq(s.v, grid);
    residuals.push_back(lhs - (initial + work));
  }
  return detail::finish_report(std::move(residuals), traj);
}

/// Coupled energy inequality: elastic + kinetic + dissipation + exchange +
/// coupling + penalty <= work + 1/2 int |m0_x|^2 + 1/2 int |u1|^2.
inline InequalityReport check_lemma22(const Trajectory& traj) {
  if (!is_coupled(traj.mode)) throw ModeMismatch("coupled inequality needs a coupled run");
  const EnergyReport report = energy_report(traj);
  const EnergyEntry& first = report.front();
  const double data = first.exchange + first.kinetic;
  std::vector<double> residuals;
  residuals.reserve(report.size());
  for (const EnergyEntry& e : report) {
    const double lhs =
        e.elastic + e.kinetic + e.dissipation + e.exchange + e.coupling + e.penalty;
    residuals.push_back(lhs - (e.work + data));
  }
  return detail::finish_report(std::move(residuals), traj);
}

/// Running suprema bounding the solution uniformly in eps and delta.
struct AprioriBounds {
  double c1 = 0.0;  // sup int |u_x|^2
  double c2 = 0.0;  // sup int |u_t|^2
  double c3 = 0.0;  // sup int |m_x|^2
  double c4 = 0.0;  // int_Q |m_t|^2
  double c5 = 0.0;  // sup int (|m|^2-1)^2 / delta

  std::array<double, 5> as_array() const { return {c1, c2, c3, c4, c5}; }
};

inline AprioriBounds apriori_bounds(const Trajectory& traj) {
  const Grid& grid = traj.grid();
  AprioriBounds b;
  for (std::size_t n = 0; n < traj.n_levels(); ++n) {
    const FieldState& s = traj.states[n];
    b.c1 = std::max(b.c1, gradient_norm_sq(s.u, grid));
    b.c2 = std::max(b.c2, l2_norm_sq(s.v, grid));
    b.c3 = std::max(b.c3, gradient_norm_sq(s.m1, grid) + gradient_norm_sq(s.m2, grid));
    b.c5 = std::max(b.c5, detail::penalty_integral(s, traj.params.delta, grid));
    if (n > 0)
      b.c4 += traj.dt() * detail::magnetization_rate_sq(traj.states[n - 1], s, traj.dt(), grid);
  }
  return b;
}

/// Discrete Gronwall argument on E(t): budget = max_t [E(t) - int_0^t E] and
/// ratio = max_t E(t) / (budget e^t), which the continuous lemma bounds by 1.
struct GronwallReport {
  double budget = 0.0;
  double max_ratio = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

inline GronwallReport gronwall_check(const EnergyReport& report, double h, double dt) {
  GronwallReport g;
  double integral = 0.0;
  for (std::size_t n = 0; n < report.size(); ++n) {
    if (n > 0) integral += 0.5 * dt * (report[n - 1].total + report[n].total);
    g.budget = std::max(g.budget, report[n].total - integral);
  }
  for (const EnergyEntry& e : report)
    if (g.budget > 0.0) g.max_ratio = std::max(g.max_ratio, e.total / (g.budget * std::exp(e.t)));
  g.tolerance = monitor_tolerance(h, dt);
  g.pass = g.max_ratio <= 1.0 + g.tolerance;
  return g;
}

// ---------------------------------------------------------------------------
// Weak form

enum class SpatialShape { Zero, Sine, Cosine, Bump };
enum class TemporalShape { Linear, Constant };

/// Closed-form test function s(x) * r(t); r = T - t (vanishes at T) or 1.
struct TestFunction {
  SpatialShape shape = SpatialShape::Sine;
  int mode = 1;
  TemporalShape temporal = TemporalShape::Linear;

  double space(double x) const {
    const double k = mode * std::numbers::pi;
    switch (shape) {
      case SpatialShape::Zero: return 0.0;
      case SpatialShape::Sine: return std::sin(k * x);
      case SpatialShape::Cosine: return std::cos(k * x);
      case SpatialShape::Bump: return 16.0 * x * x * (1.0 - x) * (1.0 - x);
    }
    return 0.0;
  }
  double space_dx(double x) const {
    const double k = mode * std::numbers::pi;
    switch (shape) {
      case SpatialShape::Zero: return 0.0;
      case SpatialShape::Sine: return k * std::cos(k * x);
      case SpatialShape::Cosine: return -k * std::sin(k * x);
      case SpatialShape::Bump: return 32.0 * x * (1.0 - x) * (1.0 - 2.0 * x);
    }
    return 0.0;
  }
  double time(double t, double T) const { return temporal == TemporalShape::Linear ? T - t : 1.0; }
  double time_dt() const { return temporal == TemporalShape::Linear ? -1.0 : 0.0; }

  double value(double x, double t, double T) const { return space(x) * time(t, T); }
  double dx(double x, double t, double T) const { return space_dx(x) * time(t, T); }
  double dt(double x) const { return space(x) * time_dt(); }
  bool operator==(const TestFunction&) const = default;
};

struct VectorTestFunction {
  TestFunction first;
  TestFunction second{SpatialShape::Zero};
  bool operator==(const VectorTestFunction&) const = default;
};

struct WeakResidual {
  double displacement = 0.0;
  double magnetization = 0.0;
};

namespace detail {
inline void require_admissible(const Trajectory& traj, const TestFunction& phi,
                               const VectorTestFunction& psi) {
  const double T = traj.states.back().t;
  const Grid& grid = traj.grid();
  constexpr double tol = 1e-12;
  for (const FieldState& s : traj.states)
    if (std::abs(phi.value(0.0, s.t, T)) > tol || std::abs(phi.value(1.0, s.t, T)) > tol)
      throw InvalidTestFunction("phi must vanish on the spatial boundary");
  for (std::size_t j = 0; j < grid.n_nodes(); ++j) {
    const double x = grid.node(j);
    if (std::abs(phi.value(x, T, T)) > tol) throw InvalidTestFunction("phi must vanish at t = T");
    if (std::abs(psi.first.value(x, T, T)) > tol || std::abs(psi.second.value(x, T, T)) > tol)
      throw InvalidTestFunction("psi must vanish at t = T");
  }
}
}  // namespace detail

/// Residuals of the displacement and magnetization weak identities over
/// Q = (0,1) x (0,T), by the trapezoid rule in x and t. The memory double
/// integral int_0^t G(t-tau) u_x(tau) dtau is product-integrated.
inline WeakResidual weak_residual(const Trajectory& traj, const TestFunction& phi,
                                  const VectorTestFunction& psi) {
  if (traj.n_levels() < 2) throw InvalidArgument("weak residual needs at least one step");
  detail::require_admissible(traj, phi, psi);

  const Grid& grid = traj.grid();
  const double dt = traj.dt();
  const double T = traj.states.back().t;
  const std::size_t levels = traj.n_levels();
  const std::size_t len = grid.n_nodes();
  const double lambda = is_coupled(traj.mode) ? traj.params.lambda : 0.0;
  const double delta = traj.params.delta;

  History strain(dt, len);
  for (const FieldState& s : traj.states) strain.append(dx_centered(s.u, grid));
  const ConvolutionPlan plan = ConvolutionPlan::for_kernel(traj.params.kernel, dt, levels);

  Profile flux_integral(len, 0.0), force_integral(len, 0.0);
  Profile q_prev, f_prev;
  Profile phi_n(len), phi_x(len), phi_t(len), p1(len), p2(len), p1x(len), p2x(len), p1t(len),
      p2t(len);

  double ru = 0.0;
  double rm = 0.0;
  for (std::size_t n = 0; n < levels; ++n) {
    const FieldState& s = traj.states[n];
    const double t = s.t;
    const double wt = (n == 0 || n + 1 == levels) ? 0.5 * dt : dt;

    Profile q(len);
    for (std::size_t j = 0; j < len; ++j) q[j] = 0.5 * lambda * lambda_dot({s.m1[j], s.m2[j]});
    const Profile f = traj.forcing_at(n);
    if (n > 0)
      for (std::size_t j = 0; j < len; ++j) {
        flux_integral[j] += 0.5 * dt * (q_prev[j] + q[j]);
        force_integral[j] += 0.5 * dt * (f_prev[j] + f[j]);
      }
    q_prev = q;
    f_prev = f;

    for (std::size_t j = 0; j < len; ++j) {
      const double x = grid.node(j);
      phi_n[j] = phi.value(x, t, T);
      phi_x[j] = phi.dx(x, t, T);
      phi_t[j] = phi.dt(x);
      p1[j] = psi.first.value(x, t, T);
      p2[j] = psi.second.value(x, t, T);
      p1x[j] = psi.first.dx(x, t, T);
      p2x[j] = psi.second.dx(x, t, T);
      p1t[j] = psi.first.dt(x);
      p2t[j] = psi.second.dt(x);
    }

    const Profile memory = convolve_G(strain, plan, n);
    Profile integrand_u(len);
    for (std::size_t j = 0; j < len; ++j)
      integrand_u[j] = -phi_t[j] * s.u[j] + phi_x[j] * (memory[j] + flux_integral[j]) -
                       phi_n[j] * (traj.initial.u1[j] + force_integral[j]);

    const Profile ux = dx_centered(s.u, grid);
    const Profile m1x = dx_centered(s.m1, grid);
    const Profile m2x = dx_centered(s.m2, grid);
    Profile integrand_m(len);
    for (std::size_t j = 0; j < len; ++j) {
      const double m1 = s.m1[j], m2 = s.m2[j];
      const double rho = m1 * m1 + m2 * m2 - 1.0;
      const Vec2 lm = lambda_op({m1, m2});
      integrand_m[j] = -(p1t[j] * m1 + p2t[j] * m2) + (p1[j] * m1 + p2[j] * m2) * rho / delta +
                       lambda * (p1[j] * lm[0] + p2[j] * lm[1]) * ux[j] +
                       p1x[j] * m1x[j] + p2x[j] * m2x[j];
    }

    double su = 0.5 * (integrand_u.front() + integrand_u.back());
    double sm = 0.5 * (integrand_m.front() + integrand_m.back());
    for (std::size_t j = 1; j + 1 < len; ++j) {
      su += integrand_u[j];
      sm += integrand_m[j];
    }
    ru += wt * su * grid.h;
    rm += wt * sm * grid.h;
  }

  Profile initial_term(len);
  for (std::size_t j = 0; j < len; ++j) {
    const double x = grid.node(j);
    initial_term[j] = traj.initial.m0_1[j] * psi.first.value(x, 0.0, T) +
                      traj.initial.m0_2[j] * psi.second.value(x, 0.0, T);
  }
  double s0 = 0.5 * (initial_term.front() + initial_term.back());
  for (std::size_t j = 1; j + 1 < len; ++j) s0 += initial_term[j];
  rm -= s0 * grid.h;

  return {ru, rm};
}

}  // namespace mvisco
