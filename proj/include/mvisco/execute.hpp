#pragma once

// Runs a RunConfig and writes its artifacts:
//   trajectory.csv  t,x,u,v,m1,m2              (simulate; every stride-th level)
//   energy.csv      one row per level           (simulate)
//   kernel.csv      t,G,G_dot                   (validate-kernel)
//   sweep.csv       parameter,value,metric,level,number (sweeps, refine, check-weak)
//   summary.json    results and pass/fail checks
//   manifest.json   config echo and versions
//   timing.txt      wall-clock seconds (kept apart so the rest is reproducible)

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "mvisco/config.hpp"
#include "mvisco/diagnostics.hpp"
#include "mvisco/experiments.hpp"
#include "mvisco/kernel.hpp"
#include "mvisco/setup.hpp"

namespace mvisco {

inline constexpr const char* kVersion = "0.1.0";

using Json = nlohmann::ordered_json;

inline const std::vector<std::string> kTrajectoryColumns{"t", "x", "u", "v", "m1", "m2"};
inline const std::vector<std::string> kEnergyColumns{
    "level",   "t",          "kinetic",  "elastic", "elastic_quarter", "exchange",
    "penalty", "penalty_eighth", "coupling", "dissipation", "work",   "total",
    "lemma21_residual", "lemma22_residual"};
inline const std::vector<std::string> kKernelColumns{"t", "G", "G_dot"};
inline const std::vector<std::string> kSweepColumns{"parameter", "value", "metric", "level",
                                                    "number"};

/// Shortest representation that reads back to the same double.
inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

/// One pass/fail diagnostic. Disabled checks are reported but never fail a run.
struct Check {
  std::string name;
  double value = 0.0;
  std::optional<double> lower;
  std::optional<double> upper;
  bool pass = false;
  bool enabled = true;
};

inline Check make_check(std::string name, double value, std::optional<double> lower,
                        std::optional<double> upper, bool enabled) {
  bool pass = std::isfinite(value);
  if (lower) pass = pass && value >= *lower;
  if (upper) pass = pass && value <= *upper;
  return {std::move(name), value, lower, upper, pass, enabled};
}

inline Check flag_check(std::string name, bool ok, bool enabled) {
  return {std::move(name), ok ? 1.0 : 0.0, 1.0, std::nullopt, ok, enabled};
}

struct ExecutionResult {
  int exit_status = 0;
  Json summary;
  std::vector<std::string> files;
};

namespace detail {

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns)
      : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw IoError("cannot write " + path.string());
    row_begin();
    for (const auto& c : columns) cell(c);
    row_end();
  }
  void row_begin() { first_ = true; }
  void cell(const std::string& s) {
    if (!first_) out_ << ',';
    out_ << s;
    first_ = false;
  }
  void cell(double x) { cell(format_number(x)); }
  void cell(std::size_t n) { cell(std::to_string(n)); }
  void row_end() { out_ << '\n'; }
  ~CsvWriter() = default;
  void close() {
    out_.close();
    if (!out_) throw IoError("failed writing " + path_.string());
  }

 private:
  std::ofstream out_;
  std::filesystem::path path_;
  bool first_ = true;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

inline Json bounds_json(const AprioriBounds& b) {
  return Json{{"C1", b.c1}, {"C2", b.c2}, {"C3", b.c3}, {"C4", b.c4}, {"C5", b.c5}};
}

inline Json checks_json(const std::vector<Check>& checks) {
  Json arr = Json::array();
  for (const Check& c : checks) {
    Json j{{"name", c.name}, {"value", c.value}};
    if (c.lower) j["lower"] = *c.lower;
    if (c.upper) j["upper"] = *c.upper;
    j["pass"] = c.pass;
    j["enabled"] = c.enabled;
    arr.push_back(std::move(j));
  }
  return arr;
}

inline bool all_pass(const std::vector<Check>& checks) {
  return std::all_of(checks.begin(), checks.end(),
                     [](const Check& c) { return c.pass || !c.enabled; });
}

inline void write_sweep_csv(const std::filesystem::path& path, const SweepResult& r) {
  CsvWriter csv(path, kSweepColumns);
  for (const SweepRecord& rec : r.records) {
    csv.row_begin();
    csv.cell(r.parameter);
    csv.cell(rec.value);
    csv.cell(rec.metric);
    csv.cell(rec.level);
    csv.cell(rec.number);
    csv.row_end();
  }
  csv.close();
}

inline Json sweep_json(const SweepResult& r) {
  Json j;
  j["parameter"] = r.parameter;
  j["values"] = r.values;
  Json bounds = Json::array();
  for (const auto& b : r.bounds) bounds.push_back(bounds_json(b));
  j["apriori_bounds"] = bounds;
  j["u_diffs"] = r.u_diffs;
  j["m_diffs"] = r.m_diffs;
  j["observed_orders"] = r.observed_orders;
  return j;
}

inline std::vector<Check> uniformity_checks(const std::vector<AprioriBounds>& bounds,
                                            bool enabled) {
  const auto ratios = bound_ratios(bounds);
  std::vector<Check> out;
  for (std::size_t k = 0; k < 5; ++k)
    out.push_back(make_check("uniformity_C" + std::to_string(k + 1), ratios[k], std::nullopt, 1.1,
                             enabled));
  return out;
}

inline Json ratios_json(const std::vector<AprioriBounds>& bounds) {
  const auto r = bound_ratios(bounds);
  return Json{{"C1", r[0]}, {"C2", r[1]}, {"C3", r[2]}, {"C4", r[3]}, {"C5", r[4]}};
}

// Exact displacement of the undamped wave problem, when the setup is one.
inline DisplacementOracle wave_oracle(const ProblemSetup& p) {
  const auto* c = std::get_if<Constant>(&p.kernel.family);
  const auto* s = std::get_if<SineProfile>(&p.u1);
  const bool uncoupled = p.lambda == 0.0 || p.mode == SimulationMode::ViscoelasticOnly;
  if (!c || !s || !uncoupled || !is_zero(p.forcing)) return {};
  const double k = s->mode * std::numbers::pi;
  const double speed = std::sqrt(c->value);
  const double a = s->amplitude;
  return [=](double x, double t) { return a * std::sin(k * x) * std::sin(k * speed * t) / (k * speed); };
}

// ---------------------------------------------------------------------------

inline Json run_simulate(const RunConfig& cfg, const std::filesystem::path& dir,
                         std::vector<Check>& checks, std::vector<std::string>& files) {
  const ProblemSetup& p = cfg.problem;
  const Trajectory traj = run_setup(p);
  const Grid& grid = traj.grid();
  const bool coupled = is_coupled(traj.mode);

  {
    CsvWriter csv(dir / "trajectory.csv", kTrajectoryColumns);
    for (std::size_t n = 0; n < traj.n_levels(); ++n) {
      if (n % cfg.output.stride != 0 && n + 1 != traj.n_levels()) continue;
      const FieldState& s = traj.states[n];
      for (std::size_t j = 0; j < grid.n_nodes(); ++j) {
        csv.row_begin();
        csv.cell(s.t);
        csv.cell(grid.node(j));
        csv.cell(s.u[j]);
        csv.cell(s.v[j]);
        csv.cell(s.m1[j]);
        csv.cell(s.m2[j]);
        csv.row_end();
      }
    }
    csv.close();
    files.push_back("trajectory.csv");
  }

  const EnergyReport report = energy_report(traj);
  const InequalityReport l21 = check_lemma21(traj);
  std::optional<InequalityReport> l22;
  if (coupled) l22 = check_lemma22(traj);
  {
    CsvWriter csv(dir / "energy.csv", kEnergyColumns);
    for (std::size_t n = 0; n < report.size(); ++n) {
      const EnergyEntry& e = report[n];
      csv.row_begin();
      csv.cell(n);
      for (double x : {e.t, e.kinetic, e.elastic, e.elastic_quarter, e.exchange, e.penalty,
                       e.penalty_eighth, e.coupling, e.dissipation, e.work, e.total, l21.residuals[n]})
        csv.cell(x);
      csv.cell(l22 ? format_number(l22->residuals[n]) : std::string());
      csv.row_end();
    }
    csv.close();
    files.push_back("energy.csv");
  }

  const AprioriBounds bounds = apriori_bounds(traj);
  const GronwallReport gron = gronwall_check(report, grid.h, traj.dt());
  checks.push_back(make_check("lemma21", l21.max_residual, std::nullopt, l21.tolerance,
                              cfg.diagnostics.lemma21));
  if (l22)
    checks.push_back(make_check("lemma22", l22->max_residual, std::nullopt, l22->tolerance,
                                cfg.diagnostics.lemma22));
  checks.push_back(make_check("gronwall", gron.max_ratio, std::nullopt, 1.0 + gron.tolerance,
                              cfg.diagnostics.gronwall));

  Json j;
  j["mode"] = to_string(p.mode);
  j["n_cells"] = grid.n_cells;
  j["dt"] = traj.dt();
  j["n_steps"] = traj.n_levels() - 1;
  j["final_time"] = traj.states.back().t;
  j["final_energy"] = report.back().total;
  j["apriori_bounds"] = bounds_json(bounds);
  j["gronwall_budget"] = gron.budget;
  j["warnings"] = traj.initial.warnings;
  return j;
}

inline Json run_sweep_epsilon(const RunConfig& cfg, const std::filesystem::path& dir,
                              std::vector<Check>& checks, std::vector<std::string>& files) {
  const EpsilonSweep s =
      epsilon_sweep(cfg.problem, cfg.sweep.epsilon, cfg.output.jobs, cfg.sweep.compare_singular);
  write_sweep_csv(dir / "sweep.csv", s.result);
  files.push_back("sweep.csv");

  checks.push_back(flag_check("cauchy_decreasing", s.cauchy_decreasing, cfg.diagnostics.cauchy));
  if (s.singular_gap && !s.result.u_diffs.empty())
    checks.push_back(make_check("singular_gap", *s.singular_gap, std::nullopt,
                                s.result.u_diffs.back(), cfg.diagnostics.cauchy));
  for (Check& c : uniformity_checks(s.result.bounds, cfg.diagnostics.uniformity))
    checks.push_back(std::move(c));

  Json j = sweep_json(s.result);
  j["dt"] = s.dt;
  j["cauchy_decreasing"] = s.cauchy_decreasing;
  j["singular_gap"] = s.singular_gap ? Json(*s.singular_gap) : Json(nullptr);
  j["bound_ratios"] = ratios_json(s.result.bounds);
  j["warnings"] = s.result.warnings;
  return j;
}

inline Json run_sweep_delta(const RunConfig& cfg, const std::filesystem::path& dir,
                            std::vector<Check>& checks, std::vector<std::string>& files) {
  const DeltaSweep s = delta_sweep(cfg.problem, cfg.sweep.delta, cfg.output.jobs);
  write_sweep_csv(dir / "sweep.csv", s.result);
  files.push_back("sweep.csv");

  checks.push_back(flag_check("penalty_within_bound", s.within_bound, cfg.diagnostics.penalty));
  if (s.slope)
    checks.push_back(make_check("penalty_slope", *s.slope, 0.3, 0.7, cfg.diagnostics.penalty));
  for (Check& c : uniformity_checks(s.result.bounds, cfg.diagnostics.uniformity))
    checks.push_back(std::move(c));

  Json j = sweep_json(s.result);
  j["penalty_measure"] = s.penalty_measure;
  j["penalty_bound"] = s.penalty_bound;
  j["penalty_slope"] = s.slope ? Json(*s.slope) : Json(nullptr);
  j["bound_ratios"] = ratios_json(s.result.bounds);
  j["warnings"] = s.result.warnings;
  return j;
}

inline Json refinement_json(const RefinementStudy& r) {
  Json levels = Json::array();
  for (std::size_t i = 0; i < r.n_cells.size(); ++i) {
    Json l{{"N", r.n_cells[i]}, {"dt", r.dts[i]}};
    if (!r.errors.empty()) l["max_error"] = r.errors[i];
    if (!r.weak.empty()) {
      l["weak_displacement"] = r.weak[i].displacement;
      l["weak_magnetization"] = r.weak[i].magnetization;
    }
    levels.push_back(std::move(l));
  }
  return levels;
}

inline Json run_refine(const RunConfig& cfg, const std::filesystem::path& dir,
                       std::vector<Check>& checks, std::vector<std::string>& files) {
  const DisplacementOracle oracle = wave_oracle(cfg.problem);
  const RefinementStudy r =
      refinement_study(cfg.problem, cfg.sweep.levels, oracle,
                       std::make_pair(cfg.weak.phi, cfg.weak.psi), cfg.output.jobs);
  write_sweep_csv(dir / "sweep.csv", r.result);
  files.push_back("sweep.csv");

  const double required = oracle ? 1.8 : 0.8;
  if (!r.result.observed_orders.empty()) {
    const double worst =
        *std::min_element(r.result.observed_orders.begin(), r.result.observed_orders.end());
    checks.push_back(make_check("observed_order", worst, required, std::nullopt,
                                cfg.diagnostics.convergence));
  }
  Json j = sweep_json(r.result);
  j["reference"] = oracle ? "wave-oracle" : "self-convergence";
  j["required_order"] = required;
  j["levels"] = refinement_json(r);
  j["warnings"] = r.result.warnings;
  return j;
}

/// Residual sequence counts as decreasing when each magnitude drops or both
/// sit at the quadrature floor.
inline bool residuals_decreasing(const std::vector<double>& xs, double floor) {
  if (xs.size() < 2) return false;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    const double a = std::abs(xs[i]), b = std::abs(xs[i + 1]);
    if (!(b < a) && !(a <= floor && b <= floor)) return false;
  }
  return true;
}

inline constexpr double kQuadratureFloor = 1e-10;

inline Json run_check_weak(const RunConfig& cfg, const std::filesystem::path& dir,
                           std::vector<Check>& checks, std::vector<std::string>& files) {
  RefinementStudy r;
  if (cfg.weak.levels >= 2) {
    r = refinement_study(cfg.problem, cfg.weak.levels, {},
                         std::make_pair(cfg.weak.phi, cfg.weak.psi), cfg.output.jobs);
  } else {
    const Trajectory traj = run_setup(cfg.problem);
    r.n_cells.push_back(traj.grid().n_cells);
    r.dts.push_back(traj.dt());
    r.weak.push_back(weak_residual(traj, cfg.weak.phi, cfg.weak.psi));
    r.result.parameter = "h";
    r.result.values.push_back(traj.grid().h);
    r.result.records.push_back({traj.grid().h, "weak_displacement", 0, r.weak[0].displacement});
    r.result.records.push_back({traj.grid().h, "weak_magnetization", 0, r.weak[0].magnetization});
  }
  write_sweep_csv(dir / "sweep.csv", r.result);
  files.push_back("sweep.csv");

  std::vector<double> du, dm;
  for (const auto& w : r.weak) {
    du.push_back(w.displacement);
    dm.push_back(w.magnetization);
  }
  Json j;
  j["levels"] = refinement_json(r);
  if (r.weak.size() >= 2) {
    const bool dec = residuals_decreasing(du, kQuadratureFloor) &&
                     residuals_decreasing(dm, kQuadratureFloor);
    j["decreasing"] = dec;
    j["displacement_orders"] = halving_orders(du);
    j["magnetization_orders"] = halving_orders(dm);
    checks.push_back(flag_check("weak_decreasing", dec, cfg.diagnostics.weak));
  } else {
    const double worst = std::max(std::abs(du[0]), std::abs(dm[0]));
    checks.push_back(make_check("weak_residual", worst, std::nullopt, kQuadratureFloor,
                                cfg.diagnostics.weak));
  }
  return j;
}

inline Json run_validate_kernel(const RunConfig& cfg, const std::filesystem::path& dir,
                                std::vector<Check>& checks, std::vector<std::string>& files) {
  const RelaxationKernel kernel = make_kernel(cfg.problem.kernel, cfg.problem.epsilon);
  const KernelValidationReport rep =
      validate(kernel, cfg.kernel_check.horizon, cfg.kernel_check.samples);
  {
    CsvWriter csv(dir / "kernel.csv", kKernelColumns);
    const std::size_t n = cfg.kernel_check.samples;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = rep.t_min * std::pow(rep.t_max / rep.t_min,
                                            static_cast<double>(i) / static_cast<double>(n - 1));
      csv.row_begin();
      csv.cell(t);
      csv.cell(kernel.eval(t));
      csv.cell(kernel.eval_dot(t));
      csv.row_end();
    }
    csv.close();
    files.push_back("kernel.csv");
  }
  checks.push_back(flag_check("kernel_admissible", rep.ok(), true));
  Json violations = Json::array();
  for (const auto& v : rep.sign_violations) violations.push_back({{"t", v.t}, {"condition", v.condition}});
  Json j;
  j["family"] = family_name(cfg.problem.kernel);
  j["epsilon"] = cfg.problem.epsilon;
  j["horizon"] = cfg.kernel_check.horizon;
  j["t_min"] = rep.t_min;
  j["t_max"] = rep.t_max;
  j["sample_count"] = rep.sample_count;
  j["integrable_on_0T"] = rep.integrable_on_0T;
  j["sign_violations"] = violations;
  j["singular_at_origin"] = kernel.singular_at_origin();
  return j;
}

}  // namespace detail

/// Runs the configured command, writing artifacts into cfg.output.dir.
/// Exit status 1 when an enabled check fails, 0 otherwise.
inline ExecutionResult execute(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  const fs::path dir(cfg.output.dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());

  const auto start = std::chrono::steady_clock::now();
  std::vector<Check> checks;
  ExecutionResult result;
  Json body;
  switch (cfg.command) {
    case Command::Simulate: body = detail::run_simulate(cfg, dir, checks, result.files); break;
    case Command::SweepEpsilon: body = detail::run_sweep_epsilon(cfg, dir, checks, result.files); break;
    case Command::SweepDelta: body = detail::run_sweep_delta(cfg, dir, checks, result.files); break;
    case Command::Refine: body = detail::run_refine(cfg, dir, checks, result.files); break;
    case Command::ValidateKernel:
      body = detail::run_validate_kernel(cfg, dir, checks, result.files);
      break;
    case Command::CheckWeak: body = detail::run_check_weak(cfg, dir, checks, result.files); break;
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const bool pass = detail::all_pass(checks);
  Json summary;
  summary["command"] = to_string(cfg.command);
  for (auto& [k, v] : body.items()) summary[k] = v;
  summary["checks"] = detail::checks_json(checks);
  summary["pass"] = pass;
  detail::write_text(dir / "summary.json", summary.dump(2) + "\n");
  result.files.push_back("summary.json");

  result.files.push_back("manifest.json");
  Json manifest;
  manifest["program"] = "mvisco";
  manifest["version"] = kVersion;
  manifest["command"] = to_string(cfg.command);
  manifest["config"] = serialize_config(cfg);
  manifest["compiler"] = __VERSION__;
  manifest["toml_library"] = std::to_string(TOML_LIB_MAJOR) + "." + std::to_string(TOML_LIB_MINOR) +
                             "." + std::to_string(TOML_LIB_PATCH);
  manifest["json_library"] = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                             std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                             std::to_string(NLOHMANN_JSON_VERSION_PATCH);
  manifest["monitor_constant"] = kMonitorConstant;
  manifest["outputs"] = result.files;
  manifest["timing_file"] = "timing.txt";
  detail::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  detail::write_text(dir / "timing.txt", "wall_seconds " + format_number(seconds) + "\n");

  result.summary = std::move(summary);
  result.exit_status = pass ? 0 : 1;
  return result;
}

}  // namespace mvisco
