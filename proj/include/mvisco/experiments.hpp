#pragma once

// Parameter sweeps: eps -> 0, delta -> 0 and grid refinement.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mvisco/diagnostics.hpp"
#include "mvisco/errors.hpp"
#include "mvisco/setup.hpp"

namespace mvisco {

/// Evaluates task(i) for i in [0, count) on at most `jobs` threads. Results
/// land at their index, so the output never depends on scheduling.
template <typename T>
std::vector<T> parallel_map(std::size_t count, std::size_t jobs,
                            const std::function<T(std::size_t)>& task) {
  std::vector<std::optional<T>> slots(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        slots[i].emplace(task(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(jobs, count));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < n_threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<T> out;
  out.reserve(count);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

// ---------------------------------------------------------------------------
// Lattices

struct Lattice {
  std::size_t n_cells = 0;
  std::size_t n_steps = 0;
  bool operator==(const Lattice&) const = default;
};

/// Samples of one scalar field at every node and time level of a lattice.
struct LatticeField {
  Lattice lattice;
  std::vector<Profile> levels;
};

/// Injection onto a coarser lattice whose nodes and levels are a subset of
/// the field's own. Restricting onto the field's own lattice is the identity.
inline LatticeField restrict_to_lattice(const LatticeField& field, const Lattice& target) {
  const Lattice& src = field.lattice;
  if (target.n_cells == 0 || target.n_steps == 0 || src.n_cells % target.n_cells != 0 ||
      src.n_steps % target.n_steps != 0)
    throw InvalidArgument("target lattice is not contained in the source lattice");
  if (field.levels.size() != src.n_steps + 1) throw SizeMismatch("field does not fill its lattice");
  const std::size_t xs = src.n_cells / target.n_cells;
  const std::size_t ts = src.n_steps / target.n_steps;
  LatticeField out{target, {}};
  out.levels.reserve(target.n_steps + 1);
  for (std::size_t n = 0; n <= target.n_steps; ++n) {
    const Profile& row = field.levels[n * ts];
    if (row.size() != src.n_cells + 1) throw SizeMismatch("profile does not match lattice");
    Profile coarse(target.n_cells + 1);
    for (std::size_t j = 0; j <= target.n_cells; ++j) coarse[j] = row[j * xs];
    out.levels.push_back(std::move(coarse));
  }
  return out;
}

enum class FieldComponent { U, M1, M2 };

inline LatticeField lattice_field(const Trajectory& traj, FieldComponent c) {
  LatticeField f{{traj.grid().n_cells, traj.n_levels() - 1}, {}};
  f.levels.reserve(traj.n_levels());
  for (const FieldState& s : traj.states)
    f.levels.push_back(c == FieldComponent::U ? s.u : c == FieldComponent::M1 ? s.m1 : s.m2);
  return f;
}

/// L2(Q) norm of a - b on the coarser of the two lattices.
inline double lattice_distance(const LatticeField& a, const LatticeField& b) {
  const Lattice common{std::min(a.lattice.n_cells, b.lattice.n_cells),
                       std::min(a.lattice.n_steps, b.lattice.n_steps)};
  const LatticeField ra = restrict_to_lattice(a, common);
  const LatticeField rb = restrict_to_lattice(b, common);
  std::vector<Profile> diff(ra.levels.size());
  for (std::size_t n = 0; n < diff.size(); ++n) {
    diff[n].resize(common.n_cells + 1);
    for (std::size_t j = 0; j <= common.n_cells; ++j)
      diff[n][j] = ra.levels[n][j] - rb.levels[n][j];
  }
  const Grid grid = make_grid(common.n_cells);
  return std::sqrt(qt_norm_sq(diff, grid, 1.0 / static_cast<double>(common.n_steps)));
}

inline double u_distance(const Trajectory& a, const Trajectory& b) {
  return lattice_distance(lattice_field(a, FieldComponent::U), lattice_field(b, FieldComponent::U));
}

inline double m_distance(const Trajectory& a, const Trajectory& b) {
  const double d1 =
      lattice_distance(lattice_field(a, FieldComponent::M1), lattice_field(b, FieldComponent::M1));
  const double d2 =
      lattice_distance(lattice_field(a, FieldComponent::M2), lattice_field(b, FieldComponent::M2));
  return std::hypot(d1, d2);
}

// ---------------------------------------------------------------------------
// Results

/// One row of the long-format result table.
struct SweepRecord {
  double value = 0.0;
  std::string metric;
  std::size_t level = 0;
  double number = 0.0;
};

struct SweepResult {
  std::string parameter;
  std::vector<double> values;
  std::vector<AprioriBounds> bounds;
  std::vector<double> u_diffs;  // consecutive runs
  std::vector<double> m_diffs;
  std::vector<double> observed_orders;
  std::vector<SweepRecord> records;
  std::vector<std::string> warnings;
};

/// max/min of each C_k across the runs (1 when every value is zero).
inline std::array<double, 5> bound_ratios(const std::vector<AprioriBounds>& bounds) {
  std::array<double, 5> out{};
  for (std::size_t k = 0; k < 5; ++k) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& b : bounds) {
      lo = std::min(lo, b.as_array()[k]);
      hi = std::max(hi, b.as_array()[k]);
    }
    out[k] = hi == 0.0 ? 1.0 : lo == 0.0 ? std::numeric_limits<double>::infinity() : hi / lo;
  }
  return out;
}

inline bool strictly_decreasing(const std::vector<double>& xs) {
  if (xs.size() < 2) return false;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i)
    if (!(xs[i + 1] < xs[i])) return false;
  return true;
}

/// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("slope needs two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

namespace detail {

inline void require_descending(const std::vector<double>& values, bool allow_zero) {
  if (values.size() < 2) throw InvalidArgument("a sweep needs at least two values");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] > 0.0) && !(allow_zero && values[i] == 0.0))
      throw InvalidArgument("sweep values must be positive");
    if (i > 0 && !(values[i] < values[i - 1]))
      throw InvalidArgument("sweep values must be strictly decreasing");
  }
}

inline void add_bounds(SweepResult& r, std::size_t i, const AprioriBounds& b) {
  const std::array<const char*, 5> names{"C1", "C2", "C3", "C4", "C5"};
  for (std::size_t k = 0; k < 5; ++k) r.records.push_back({r.values[i], names[k], i, b.as_array()[k]});
}

inline void add_diffs(SweepResult& r) {
  for (std::size_t i = 0; i < r.u_diffs.size(); ++i) {
    r.records.push_back({r.values[i], "u_diff", i, r.u_diffs[i]});
    r.records.push_back({r.values[i], "m_diff", i, r.m_diffs[i]});
  }
  for (std::size_t i = 0; i < r.observed_orders.size(); ++i)
    r.records.push_back({r.values[i], "observed_order", i, r.observed_orders[i]});
}

}  // namespace detail

// ---------------------------------------------------------------------------
// eps -> 0

struct EpsilonSweep {
  SweepResult result;
  bool cauchy_decreasing = false;
  std::optional<double> singular_gap;  // ||u^{eps_min} - u^0||_{L2(Q)}
  double dt = 0.0;
};

/// RegularEps runs for each eps on one grid and one dt (the stable step of
/// the smallest eps), plus the eps = 0 evolution run on the same lattice.
inline EpsilonSweep epsilon_sweep(ProblemSetup base, const std::vector<double>& eps_values,
                                  std::size_t jobs = 1, bool compare_singular = true) {
  detail::require_descending(eps_values, false);
  base.mode = SimulationMode::RegularEps;
  if (!base.dt) {
    ProblemSetup finest = base;
    finest.epsilon = eps_values.back();
    base.dt = resolve_dt(finest);
  }
  const std::size_t n_runs = eps_values.size() + (compare_singular ? 1 : 0);
  const std::vector<Trajectory> runs = parallel_map<Trajectory>(
      n_runs, jobs, std::function<Trajectory(std::size_t)>([&](std::size_t i) {
        ProblemSetup s = base;
        if (i < eps_values.size()) {
          s.epsilon = eps_values[i];
        } else {
          s.epsilon = 0.0;
          s.mode = SimulationMode::SingularEvolution;
        }
        return run_setup(s);
      }));

  EpsilonSweep out;
  out.dt = runs.front().dt();
  SweepResult& r = out.result;
  r.parameter = "epsilon";
  r.values = eps_values;
  for (std::size_t i = 0; i < eps_values.size(); ++i) {
    r.bounds.push_back(apriori_bounds(runs[i]));
    detail::add_bounds(r, i, r.bounds.back());
  }
  for (std::size_t i = 0; i + 1 < eps_values.size(); ++i) {
    r.u_diffs.push_back(u_distance(runs[i], runs[i + 1]));
    r.m_diffs.push_back(m_distance(runs[i], runs[i + 1]));
  }
  for (std::size_t i = 0; i + 1 < r.u_diffs.size(); ++i)
    r.observed_orders.push_back(std::log(r.u_diffs[i] / r.u_diffs[i + 1]) /
                                std::log(eps_values[i] / eps_values[i + 1]));
  detail::add_diffs(r);
  out.cauchy_decreasing = strictly_decreasing(r.u_diffs);
  if (compare_singular) {
    out.singular_gap = u_distance(runs[eps_values.size() - 1], runs.back());
    r.records.push_back({0.0, "singular_gap", eps_values.size() - 1, *out.singular_gap});
  }
  for (const auto& t : runs)
    for (const auto& w : t.initial.warnings) r.warnings.push_back(w);
  return out;
}

// ---------------------------------------------------------------------------
// delta -> 0

struct DeltaSweep {
  SweepResult result;
  std::vector<double> penalty_measure;  // || |m|^2 - 1 ||_{L2(Omega)} at T
  std::vector<double> penalty_bound;    // sqrt(C5 delta)
  bool within_bound = false;
  std::optional<double> slope;  // log-log, absent when a measure vanishes
};

inline double penalty_measure(const FieldState& s, const Grid& grid) {
  Profile rho(s.m1.size());
  for (std::size_t j = 0; j < rho.size(); ++j)
    rho[j] = s.m1[j] * s.m1[j] + s.m2[j] * s.m2[j] - 1.0;
  return std::sqrt(l2_norm_sq(rho, grid));
}

inline DeltaSweep delta_sweep(ProblemSetup base, const std::vector<double>& delta_values,
                              std::size_t jobs = 1) {
  detail::require_descending(delta_values, false);
  if (!base.dt) base.dt = resolve_dt(base);
  const std::vector<Trajectory> runs = parallel_map<Trajectory>(
      delta_values.size(), jobs, std::function<Trajectory(std::size_t)>([&](std::size_t i) {
        ProblemSetup s = base;
        s.delta = delta_values[i];
        return run_setup(s);
      }));

  DeltaSweep out;
  SweepResult& r = out.result;
  r.parameter = "delta";
  r.values = delta_values;
  out.within_bound = true;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    r.bounds.push_back(apriori_bounds(runs[i]));
    detail::add_bounds(r, i, r.bounds.back());
    const double measure = penalty_measure(runs[i].states.back(), runs[i].grid());
    const double bound = std::sqrt(r.bounds.back().c5 * delta_values[i]);
    out.penalty_measure.push_back(measure);
    out.penalty_bound.push_back(bound);
    out.within_bound = out.within_bound && measure <= bound;
    r.records.push_back({delta_values[i], "penalty_measure", i, measure});
    r.records.push_back({delta_values[i], "penalty_bound", i, bound});
  }
  for (std::size_t i = 0; i + 1 < runs.size(); ++i) {
    r.u_diffs.push_back(u_distance(runs[i], runs[i + 1]));
    r.m_diffs.push_back(m_distance(runs[i], runs[i + 1]));
  }
  if (std::all_of(out.penalty_measure.begin(), out.penalty_measure.end(),
                  [](double m) { return m > 0.0; })) {
    out.slope = loglog_slope(delta_values, out.penalty_measure);
    r.observed_orders.push_back(*out.slope);
  }
  detail::add_diffs(r);
  for (const auto& t : runs)
    for (const auto& w : t.initial.warnings) r.warnings.push_back(w);
  return out;
}

// ---------------------------------------------------------------------------
// Grid refinement

/// Exact displacement u(x, t) when one is known.
using DisplacementOracle = std::function<double(double x, double t)>;

struct RefinementStudy {
  SweepResult result;  // values = h per level
  std::vector<std::size_t> n_cells;
  std::vector<double> dts;
  std::vector<double> errors;  // max-norm error against the oracle, if any
  std::vector<WeakResidual> weak;
};

/// Reruns with (N 2^i, dt / 2^i). With an oracle the observed order comes from
/// max-norm errors; otherwise from successive L2(Q) differences.
inline RefinementStudy refinement_study(const ProblemSetup& base, std::size_t levels,
                                        const DisplacementOracle& oracle = {},
                                        std::optional<std::pair<TestFunction, VectorTestFunction>>
                                            weak_tests = std::nullopt,
                                        std::size_t jobs = 1) {
  if (levels < 2) throw InvalidArgument("refinement needs at least two levels");
  const BuiltProblem coarse = build_problem(base);
  const std::size_t steps0 = coarse.params.n_steps();

  RefinementStudy out;
  for (std::size_t i = 0; i < levels; ++i) {
    out.n_cells.push_back(base.n_cells << i);
    out.dts.push_back(base.T / static_cast<double>(steps0 << i));
  }
  struct LevelResult {
    Trajectory traj;
    double error = 0.0;
    WeakResidual weak;
  };
  const std::vector<LevelResult> runs = parallel_map<LevelResult>(
      levels, jobs, std::function<LevelResult(std::size_t)>([&](std::size_t i) {
        ProblemSetup s = base;
        s.n_cells = out.n_cells[i];
        s.dt = out.dts[i];
        LevelResult lr{run_setup(s), 0.0, {}};
        if (oracle) {
          const Grid& g = lr.traj.grid();
          for (const FieldState& st : lr.traj.states)
            for (std::size_t j = 0; j < g.n_nodes(); ++j)
              lr.error = std::max(lr.error, std::abs(st.u[j] - oracle(g.node(j), st.t)));
        }
        if (weak_tests) lr.weak = weak_residual(lr.traj, weak_tests->first, weak_tests->second);
        return lr;
      }));

  SweepResult& r = out.result;
  r.parameter = "h";
  for (std::size_t i = 0; i < levels; ++i) {
    r.values.push_back(1.0 / static_cast<double>(out.n_cells[i]));
    r.bounds.push_back(apriori_bounds(runs[i].traj));
    detail::add_bounds(r, i, r.bounds.back());
  }
  for (std::size_t i = 0; i + 1 < levels; ++i) {
    r.u_diffs.push_back(u_distance(runs[i].traj, runs[i + 1].traj));
    r.m_diffs.push_back(m_distance(runs[i].traj, runs[i + 1].traj));
  }
  if (oracle) {
    for (const auto& lr : runs) out.errors.push_back(lr.error);
    for (std::size_t i = 0; i < levels; ++i)
      r.records.push_back({r.values[i], "max_error", i, out.errors[i]});
    for (std::size_t i = 0; i + 1 < levels; ++i)
      r.observed_orders.push_back(std::log2(out.errors[i] / out.errors[i + 1]));
  } else {
    for (std::size_t i = 0; i + 1 < r.u_diffs.size(); ++i)
      r.observed_orders.push_back(std::log2(r.u_diffs[i] / r.u_diffs[i + 1]));
  }
  if (weak_tests) {
    for (std::size_t i = 0; i < levels; ++i) {
      out.weak.push_back(runs[i].weak);
      r.records.push_back({r.values[i], "weak_displacement", i, runs[i].weak.displacement});
      r.records.push_back({r.values[i], "weak_magnetization", i, runs[i].weak.magnetization});
    }
  }
  detail::add_diffs(r);
  for (const auto& lr : runs)
    for (const auto& w : lr.traj.initial.warnings) r.warnings.push_back(w);
  return out;
}

/// Observed orders log2(|r_i| / |r_{i+1}|) of a sequence halving h and dt.
inline std::vector<double> halving_orders(const std::vector<double>& xs) {
  std::vector<double> out;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i)
    out.push_back(std::log2(std::abs(xs[i]) / std::abs(xs[i + 1])));
  return out;
}

}  // namespace mvisco
