#pragma once

// A complete, declarative description of one simulation, turned into model
// parameters, initial data and a run mode.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <tuple>

#include "mvisco/dynamics.hpp"
#include "mvisco/field.hpp"
#include "mvisco/kernel.hpp"

namespace mvisco {

enum class SimulationMode { RegularEps, SingularEvolution, ViscoelasticOnly };

inline const char* to_string(SimulationMode mode) {
  switch (mode) {
    case SimulationMode::RegularEps: return "regular-eps";
    case SimulationMode::SingularEvolution: return "singular-evolution";
    case SimulationMode::ViscoelasticOnly: return "viscoelastic-only";
  }
  return "";
}

struct ProblemSetup {
  KernelSpec kernel{Fractional{0.5, 1.0}};
  double epsilon = 0.05;
  double lambda = 1.0;
  double delta = 0.01;
  double T = 1.0;
  std::size_t n_cells = 200;
  std::optional<double> dt;  // derived from cfl when absent
  double cfl = 0.5;
  U1Shape u1 = SineProfile{};
  ThetaShape theta = SmoothstepAngle{std::numbers::pi / 2};
  Forcing forcing = ZeroForcing{};  // F itself in viscoelastic-only mode
  SimulationMode mode = SimulationMode::RegularEps;
  MemoryForm memory_form = MemoryForm::Convolution;
  bool operator==(const ProblemSetup&) const = default;
};

/// dt = cfl * h / sqrt(Geps(0)) when the kernel is bounded at the origin,
/// cfl * h otherwise; an explicit dt wins.
inline double resolve_dt(const ProblemSetup& setup) {
  if (setup.dt) return *setup.dt;
  const RelaxationKernel kernel = make_kernel(setup.kernel, setup.epsilon);
  const double h = 1.0 / static_cast<double>(setup.n_cells);
  if (kernel.singular_at_origin()) return setup.cfl * h;
  return setup.cfl * h / std::sqrt(kernel.eval(0.0));
}

inline RunMode make_mode(const ProblemSetup& setup) {
  switch (setup.mode) {
    case SimulationMode::RegularEps: return RegularEps{};
    case SimulationMode::SingularEvolution: return SingularEvolution{};
    case SimulationMode::ViscoelasticOnly: return ViscoelasticOnly{setup.forcing};
  }
  return RegularEps{};
}

struct BuiltProblem {
  ModelParams params;
  InitialData initial;
  RunMode mode;
};

inline BuiltProblem build_problem(const ProblemSetup& setup) {
  const Grid grid = make_grid(setup.n_cells);
  RelaxationKernel kernel = make_kernel(setup.kernel, setup.epsilon);
  ModelParams params = make_params(setup.lambda, setup.delta, std::move(kernel), setup.T,
                                   resolve_dt(setup), grid, setup.memory_form);
  Forcing f = setup.mode == SimulationMode::ViscoelasticOnly ? Forcing{ZeroForcing{}}
                                                              : setup.forcing;
  InitialData initial = make_initial_data(grid, setup.u1, setup.theta, std::move(f));
  return {std::move(params), std::move(initial), make_mode(setup)};
}

inline Trajectory run_setup(const ProblemSetup& setup, const StepObserver& observer = {}) {
  const BuiltProblem problem = build_problem(setup);
  return run(problem.initial, problem.params, problem.mode, observer);
}

}  // namespace mvisco
