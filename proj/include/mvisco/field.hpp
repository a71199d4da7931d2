#pragma once

// Uniform grid on (0,1), node profiles and second-order difference operators.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mvisco/errors.hpp"

namespace mvisco {

using Profile = std::vector<double>;

struct Grid {
  std::size_t n_cells = 0;
  double h = 0.0;

  std::size_t n_nodes() const noexcept { return n_cells + 1; }
  double node(std::size_t j) const noexcept {
    return j == n_cells ? 1.0 : static_cast<double>(j) * h;
  }
};

inline Grid make_grid(std::size_t n_cells) {
  if (n_cells < 4) throw InvalidArgument("grid needs at least 4 cells");
  return Grid{n_cells, 1.0 / static_cast<double>(n_cells)};
}

enum class Boundary { Dirichlet, Neumann };

namespace detail {
inline void require_length(std::span<const double> f, const Grid& grid) {
  if (f.size() != grid.n_nodes()) throw SizeMismatch("profile length does not match grid");
}
}  // namespace detail

/// Three-point second difference. Neumann fields use a mirrored ghost node;
/// Dirichlet boundary entries are extrapolated linearly from the interior.
inline Profile dxx(std::span<const double> f, const Grid& grid, Boundary bc) {
  detail::require_length(f, grid);
  const std::size_t n = grid.n_cells;
  const double inv_h2 = 1.0 / (grid.h * grid.h);
  Profile out(n + 1);
  for (std::size_t j = 1; j < n; ++j) out[j] = (f[j + 1] - 2.0 * f[j] + f[j - 1]) * inv_h2;
  if (bc == Boundary::Neumann) {
    out[0] = 2.0 * (f[1] - f[0]) * inv_h2;
    out[n] = 2.0 * (f[n - 1] - f[n]) * inv_h2;
  } else {
    out[0] = 2.0 * out[1] - out[2];
    out[n] = 2.0 * out[n - 1] - out[n - 2];
  }
  return out;
}

/// Central differences inside, second-order one-sided at both ends.
inline Profile dx_centered(std::span<const double> f, const Grid& grid) {
  detail::require_length(f, grid);
  const std::size_t n = grid.n_cells;
  const double inv_2h = 0.5 / grid.h;
  Profile out(n + 1);
  for (std::size_t j = 1; j < n; ++j) out[j] = (f[j + 1] - f[j - 1]) * inv_2h;
  out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) * inv_2h;
  out[n] = (3.0 * f[n] - 4.0 * f[n - 1] + f[n - 2]) * inv_2h;
  return out;
}

/// Trapezoid approximation of int_0^1 f^2 dx.
inline double l2_norm_sq(std::span<const double> f, const Grid& grid) {
  detail::require_length(f, grid);
  double sum = 0.5 * (f.front() * f.front() + f.back() * f.back());
  for (std::size_t j = 1; j < grid.n_cells; ++j) sum += f[j] * f[j];
  return sum * grid.h;
}

/// Trapezoid approximation of int_0^1 f g dx.
inline double l2_inner(std::span<const double> f, std::span<const double> g, const Grid& grid) {
  detail::require_length(f, grid);
  detail::require_length(g, grid);
  double sum = 0.5 * (f.front() * g.front() + f.back() * g.back());
  for (std::size_t j = 1; j < grid.n_cells; ++j) sum += f[j] * g[j];
  return sum * grid.h;
}

/// int_0^1 |f_x|^2 dx from cell differences. This is the discrete Dirichlet
/// energy paired with dxx by summation by parts.
inline double gradient_norm_sq(std::span<const double> f, const Grid& grid) {
  detail::require_length(f, grid);
  double sum = 0.0;
  for (std::size_t j = 0; j < grid.n_cells; ++j) {
    const double d = f[j + 1] - f[j];
    sum += d * d;
  }
  return sum / grid.h;
}

/// Space-time L2(Q) norm squared of a sequence of profiles sampled every dt
/// (trapezoid in both space and time).
inline double qt_norm_sq(const std::vector<Profile>& levels, const Grid& grid, double dt) {
  if (levels.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t n = 0; n < levels.size(); ++n) {
    const double w = (n == 0 || n + 1 == levels.size()) ? 0.5 : 1.0;
    sum += w * l2_norm_sq(levels[n], grid);
  }
  return levels.size() == 1 ? 0.0 : sum * dt;
}

struct FieldState {
  double t = 0.0;
  Profile u;
  Profile v;
  Profile m1;
  Profile m2;
};

// ---------------------------------------------------------------------------
// Initial data and forcing

struct ZeroProfile {
  bool operator==(const ZeroProfile&) const = default;
};
struct SineProfile {
  double amplitude = 1.0;
  int mode = 1;
  bool operator==(const SineProfile&) const = default;
};
using U1Shape = std::variant<ZeroProfile, SineProfile>;

/// theta(x) = theta0
struct ConstantAngle {
  double theta0 = 0.0;
  bool operator==(const ConstantAngle&) const = default;
};
/// theta(x) = theta_max * x^2 (3 - 2x); theta'(0) = theta'(1) = 0.
struct SmoothstepAngle {
  double theta_max = std::numbers::pi;
  bool operator==(const SmoothstepAngle&) const = default;
};
/// theta(x) = theta_max * x; incompatible with the Neumann condition.
struct LinearAngle {
  double theta_max = 1.0;
  bool operator==(const LinearAngle&) const = default;
};
using ThetaShape = std::variant<ConstantAngle, SmoothstepAngle, LinearAngle>;

struct ZeroForcing {
  bool operator==(const ZeroForcing&) const = default;
};
/// f(x,t) = amplitude * sin(mode pi x) * cos(omega t)
struct SinusoidalForcing {
  double amplitude = 1.0;
  int mode = 1;
  double omega = 0.0;
  bool operator==(const SinusoidalForcing&) const = default;
};
/// Row k holds f at t = k * dt.
struct TabulatedForcing {
  double dt = 0.0;
  std::vector<Profile> rows;
  bool operator==(const TabulatedForcing&) const = default;
};
using Forcing = std::variant<ZeroForcing, SinusoidalForcing, TabulatedForcing>;

inline Profile sample_forcing(const Forcing& forcing, const Grid& grid, double t) {
  Profile out(grid.n_nodes(), 0.0);
  if (const auto* s = std::get_if<SinusoidalForcing>(&forcing)) {
    const double tc = std::cos(s->omega * t);
    for (std::size_t j = 0; j < out.size(); ++j)
      out[j] = s->amplitude * std::sin(s->mode * std::numbers::pi * grid.node(j)) * tc;
  } else if (const auto* tab = std::get_if<TabulatedForcing>(&forcing)) {
    if (!(tab->dt > 0.0)) throw InvalidArgument("tabulated forcing needs dt > 0");
    const double k = std::round(t / tab->dt);
    if (std::abs(k * tab->dt - t) > 1e-9 * std::max(1.0, t) || k < 0 ||
        static_cast<std::size_t>(k) >= tab->rows.size())
      throw SizeMismatch("tabulated forcing has no row for the requested time");
    const Profile& row = tab->rows[static_cast<std::size_t>(k)];
    detail::require_length(row, grid);
    out = row;
  }
  return out;
}

inline bool is_zero(const Forcing& f) { return std::holds_alternative<ZeroForcing>(f); }

/// Initial velocity u1, magnetization m0 = (cos theta, sin theta) and forcing.
/// The initial displacement is identically zero.
struct InitialData {
  Profile u1;
  Profile theta;
  Profile m0_1;
  Profile m0_2;
  Forcing forcing = ZeroForcing{};
  std::vector<std::string> warnings;
};

inline Profile sample_u1(const U1Shape& shape, const Grid& grid) {
  Profile out(grid.n_nodes(), 0.0);
  if (const auto* s = std::get_if<SineProfile>(&shape)) {
    for (std::size_t j = 0; j < out.size(); ++j)
      out[j] = s->amplitude * std::sin(s->mode * std::numbers::pi * grid.node(j));
    out.front() = 0.0;
    out.back() = 0.0;
  }
  return out;
}

inline Profile sample_theta(const ThetaShape& shape, const Grid& grid) {
  Profile out(grid.n_nodes(), 0.0);
  for (std::size_t j = 0; j < out.size(); ++j) {
    const double x = grid.node(j);
    if (const auto* c = std::get_if<ConstantAngle>(&shape)) out[j] = c->theta0;
    else if (const auto* s = std::get_if<SmoothstepAngle>(&shape))
      out[j] = s->theta_max * x * x * (3.0 - 2.0 * x);
    else out[j] = std::get<LinearAngle>(shape).theta_max * x;
  }
  return out;
}

/// Builds initial data from sampled u1 and angle profiles. |m0| = 1 exactly.
inline InitialData make_initial_data(const Grid& grid, Profile u1, Profile theta,
                                     Forcing forcing = ZeroForcing{}) {
  detail::require_length(u1, grid);
  detail::require_length(theta, grid);
  InitialData data;
  if (u1.front() != 0.0 || u1.back() != 0.0) {
    data.warnings.push_back("u1 is nonzero on the boundary; boundary values set to zero");
    u1.front() = 0.0;
    u1.back() = 0.0;
  }
  const std::size_t n = grid.n_cells;
  const double left = (-3.0 * theta[0] + 4.0 * theta[1] - theta[2]) / (2.0 * grid.h);
  const double right = (3.0 * theta[n] - 4.0 * theta[n - 1] + theta[n - 2]) / (2.0 * grid.h);
  // A compatible smooth profile has one-sided boundary slopes of order h^2.
  const double scale = std::max(1.0, std::abs(theta[n] - theta[0]));
  if (std::abs(left) > 10.0 * grid.h * scale || std::abs(right) > 10.0 * grid.h * scale)
    data.warnings.push_back("m0 does not satisfy the Neumann condition at the boundary");

  data.m0_1.resize(theta.size());
  data.m0_2.resize(theta.size());
  for (std::size_t j = 0; j < theta.size(); ++j) {
    data.m0_1[j] = std::cos(theta[j]);
    data.m0_2[j] = std::sin(theta[j]);
  }
  data.u1 = std::move(u1);
  data.theta = std::move(theta);
  data.forcing = std::move(forcing);
  return data;
}

inline InitialData make_initial_data(const Grid& grid, const U1Shape& u1, const ThetaShape& theta,
                                     Forcing forcing = ZeroForcing{}) {
  return make_initial_data(grid, sample_u1(u1, grid), sample_theta(theta, grid),
                           std::move(forcing));
}

}  // namespace mvisco
