#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "mvisco/dynamics.hpp"
#include "mvisco/experiments.hpp"
#include "mvisco/setup.hpp"

using namespace mvisco;
using std::numbers::pi;

namespace {

ModelParams params_for(const KernelSpec& spec, double eps, std::size_t n, double dt, double lambda = 1.0,
                       double T = 1.0, MemoryForm form = MemoryForm::Convolution) {
  return make_params(lambda, 0.01, make_kernel(spec, eps), T, dt, make_grid(n), form);
}

double wave_error(const Trajectory& traj) {
  double err = 0.0;
  for (const FieldState& s : traj.states)
    for (std::size_t j = 0; j < traj.grid().n_nodes(); ++j) {
      const double x = traj.grid().node(j);
      err = std::max(err, std::abs(s.u[j] - std::sin(pi * x) * std::sin(pi * s.t) / pi));
    }
  return err;
}

double max_u_diff(const Trajectory& a, const Trajectory& b) {
  double d = 0.0;
  for (std::size_t n = 0; n < a.n_levels(); ++n)
    for (std::size_t j = 0; j < a.grid().n_nodes(); ++j)
      d = std::max(d, std::abs(a.states[n].u[j] - b.states[n].u[j]));
  return d;
}

}  // namespace

TEST(Dynamics, MakeParamsValidatesAndRoundsDt) {
  const auto k = make_kernel({Constant{}}, 0.0);
  const Grid g = make_grid(10);
  EXPECT_THROW(make_params(-1.0, 0.01, k, 1.0, 0.01, g), InvalidArgument);
  EXPECT_THROW(make_params(1.0, 1.0, k, 1.0, 0.01, g), InvalidArgument);
  EXPECT_THROW(make_params(1.0, 0.0, k, 1.0, 0.01, g), InvalidArgument);
  EXPECT_THROW(make_params(1.0, 0.01, k, 0.0, 0.01, g), InvalidArgument);
  EXPECT_THROW(make_params(1.0, 0.01, k, 1.0, 0.0, g), InvalidArgument);
  const ModelParams p = make_params(0.0, 0.01, k, 1.0, 0.3, g);
  EXPECT_EQ(p.n_steps(), 4u);
  EXPECT_DOUBLE_EQ(p.dt, 0.25);
}

TEST(Dynamics, LambdaOperators) {
  EXPECT_EQ(lambda_op({0.3, 0.4})[0], 0.4);
  EXPECT_EQ(lambda_op({0.3, 0.4})[1], 0.3);
  EXPECT_DOUBLE_EQ(lambda_dot({0.3, 0.4}), 2 * 0.3 * 0.4);
}

TEST(Dynamics, CflViolationIsRejected) {
  const Grid g = make_grid(20);
  const auto k = make_kernel({Fractional{0.5, 1.0}}, 0.05);
  const double dt = 1.01 * g.h / std::sqrt(k.eval(0.0));
  const ModelParams p = make_params(1.0, 0.01, k, 10.0 * dt, dt, g);
  const InitialData init = make_initial_data(g, U1Shape{SineProfile{}}, ThetaShape{ConstantAngle{}});
  EXPECT_THROW(RegularStepper(p, init, RegularEps{}), CflViolation);
  EXPECT_NO_THROW(SingularStepper(p, init, SingularEvolution{}));
}

TEST(Dynamics, ModeAndKernelMismatches) {
  const Grid g = make_grid(20);
  const InitialData init = make_initial_data(g, U1Shape{SineProfile{}}, ThetaShape{ConstantAngle{}});
  const ModelParams singular = params_for({Fractional{0.5, 1.0}}, 0.0, 20, 0.01);
  EXPECT_THROW(run(init, singular, RegularEps{}), SingularDerivative);
  const ModelParams regular = params_for({Constant{}}, 0.0, 20, 0.01);
  EXPECT_THROW(RegularStepper(regular, init, SingularEvolution{}), ModeMismatch);
  EXPECT_THROW(SingularStepper(regular, init, RegularEps{}), ModeMismatch);
  const InitialData wrong = make_initial_data(make_grid(10), U1Shape{}, ThetaShape{});
  EXPECT_THROW(run(wrong, regular, RegularEps{}), SizeMismatch);
}

TEST(Dynamics, WaveOracleBothSteppers) {
  for (std::size_t n : {50u, 100u}) {
    const Grid g = make_grid(n);
    const ModelParams p = params_for({Constant{}}, 0.0, n, g.h / 2, 0.0);
    const InitialData init = make_initial_data(g, U1Shape{SineProfile{}}, ThetaShape{ConstantAngle{}});
    EXPECT_LT(wave_error(run(init, p, RegularEps{})), 3e-4 * (50.0 / n) * (50.0 / n));
    EXPECT_LT(wave_error(run(init, p, SingularEvolution{})), 5e-4 * (50.0 / n) * (50.0 / n));
  }
}

TEST(Dynamics, DirichletBoundaryHeldExactly) {
  const Grid g = make_grid(40);
  const InitialData init = make_initial_data(g, U1Shape{SineProfile{1.0, 2}}, ThetaShape{SmoothstepAngle{}},
                                             SinusoidalForcing{1.0, 1, 3.0});
  for (const RunMode& mode : {RunMode{RegularEps{}}, RunMode{SingularEvolution{}}}) {
    const ModelParams p = params_for({Fractional{0.5, 1.0}}, 0.05, 40, 0.005);
    for (const FieldState& s : run(init, p, mode).states) {
      EXPECT_EQ(s.u.front(), 0.0);
      EXPECT_EQ(s.u.back(), 0.0);
      EXPECT_EQ(s.v.front(), 0.0);
      EXPECT_EQ(s.v.back(), 0.0);
    }
  }
}

TEST(Dynamics, StationaryStateIsPreserved) {
  const Grid g = make_grid(20);
  const InitialData init = make_initial_data(g, U1Shape{ZeroProfile{}}, ThetaShape{ConstantAngle{0.7}});
  const std::vector<std::pair<RunMode, double>> modes{
      {RegularEps{}, 0.05}, {SingularEvolution{}, 0.0}, {ViscoelasticOnly{}, 0.0}};
  for (const auto& [mode, eps] : modes) {
    const ModelParams p = params_for({Fractional{0.5, 1.0}}, eps, 20, 0.01, 1.0, 2.0);
    const Trajectory t = run(init, p, mode);
    for (const FieldState& s : t.states)
      for (std::size_t j = 0; j < g.n_nodes(); ++j) {
        EXPECT_LE(std::abs(s.u[j]), 1e-12);
        EXPECT_LE(std::abs(s.m1[j] - init.m0_1[j]), 1e-12);
        EXPECT_LE(std::abs(s.m2[j] - init.m0_2[j]), 1e-12);
      }
  }
}

TEST(Dynamics, ViscoelasticOnlyKeepsMagnetizationAndUsesSingularKernel) {
  const Grid g = make_grid(32);
  const InitialData init = make_initial_data(g, U1Shape{SineProfile{}}, ThetaShape{SmoothstepAngle{}});
  const ModelParams p = params_for({Fractional{0.5, 1.0}}, 0.0, 32, 0.01);
  const Trajectory t = run(init, p, ViscoelasticOnly{});
  EXPECT_EQ(t.states.back().m1, init.m0_1);
  EXPECT_EQ(t.states.back().m2, init.m0_2);
  EXPECT_EQ(t.n_levels(), p.n_steps() + 1);
}

// Property: with u1 = 0 the uncoupled response is linear in the forcing.
TEST(Dynamics, PropertyLinearInForcing) {
  const Grid g = make_grid(32);
  for (double eps : {0.0, 0.1}) {
    const ModelParams p = params_for({Fractional{0.5, 1.0}}, eps, 32, 0.005);
    const InitialData init = make_initial_data(g, U1Shape{ZeroProfile{}}, ThetaShape{ConstantAngle{}});
    const Trajectory a = run(init, p, ViscoelasticOnly{SinusoidalForcing{1.0, 1, 2.0}});
    const Trajectory b = run(init, p, ViscoelasticOnly{SinusoidalForcing{-2.5, 1, 2.0}});
    for (std::size_t n = 0; n < a.n_levels(); ++n)
      for (std::size_t j = 0; j < g.n_nodes(); ++j)
        EXPECT_NEAR(b.states[n].u[j], -2.5 * a.states[n].u[j], 1e-12);
  }
}

// Property: data symmetric about x = 1/2 give a symmetric displacement.
TEST(Dynamics, PropertyMirrorSymmetry) {
  const Grid g = make_grid(40);
  const InitialData init = make_initial_data(g, U1Shape{SineProfile{}}, ThetaShape{ConstantAngle{0.0}});
  const ModelParams p = params_for({Fractional{0.5, 1.0}}, 0.0, 40, 0.01);
  const Trajectory t = run(init, p, SingularEvolution{});
  for (const FieldState& s : t.states)
    for (std::size_t j = 0; j < g.n_nodes(); ++j) EXPECT_NEAR(s.u[j], s.u[g.n_cells - j], 1e-13);
}

TEST(Dynamics, MemoryFormsAgreeUnderRefinement) {
  double prev = 0.0;
  for (std::size_t n : {40u, 80u}) {
    const Grid g = make_grid(n);
    const auto k = make_kernel({Fractional{0.5, 1.0}}, 0.1);
    const double dt = 0.5 * g.h / std::sqrt(k.eval(0.0));
    const InitialData init = make_initial_data(g, U1Shape{SineProfile{}}, ThetaShape{SmoothstepAngle{}});
    const Trajectory a = run(init, params_for({Fractional{0.5, 1.0}}, 0.1, n, dt), RegularEps{});
    const Trajectory b = run(init, params_for({Fractional{0.5, 1.0}}, 0.1, n, dt, 1.0, 1.0,
                                              MemoryForm::HistoryDifference),
                             RegularEps{});
    const double d = max_u_diff(a, b);
    EXPECT_LT(d, 1e-3);
    if (prev > 0.0) EXPECT_GT(prev / d, 3.0);
    prev = d;
  }
}

// The two steppers discretize the same problem for a regular kernel.
TEST(Dynamics, SteppersAgreeForRegularKernel) {
  double prev = 0.0;
  for (std::size_t n : {40u, 80u, 160u}) {
    const Grid g = make_grid(n);
    const KernelSpec spec{PronySeries{{{1.0, 2.0}, {0.5, 0.2}}}};
    const double dt = 0.5 * g.h / std::sqrt(1.5);
    const InitialData init = make_initial_data(g, U1Shape{SineProfile{}}, ThetaShape{SmoothstepAngle{}});
    const Trajectory a = run(init, params_for(spec, 0.0, n, dt), RegularEps{});
    const Trajectory b = run(init, params_for(spec, 0.0, n, dt), SingularEvolution{});
    const double d = max_u_diff(a, b);
    if (prev > 0.0) EXPECT_GT(std::log2(prev / d), 0.8);
    prev = d;
  }
}

TEST(Dynamics, PenalizedFlowStaysNearSphere) {
  const Grid g = make_grid(50);
  const InitialData init = make_initial_data(g, U1Shape{SineProfile{}}, ThetaShape{SmoothstepAngle{pi}});
  const ModelParams p = params_for({Fractional{0.5, 1.0}}, 0.0, 50, 0.01);
  const Trajectory t = run(init, p, SingularEvolution{});
  const double bound = std::sqrt(apriori_bounds(t).c5 * 0.01);
  for (const FieldState& s : t.states) {
    EXPECT_LE(penalty_measure(s, g), bound);
    for (std::size_t j = 0; j < g.n_nodes(); ++j) EXPECT_GT(std::hypot(s.m1[j], s.m2[j]), 0.5);
  }
}

TEST(Dynamics, StepWrappersAdvanceOneLevel) {
  const Grid g = make_grid(20);
  const InitialData init = make_initial_data(g, U1Shape{SineProfile{}}, ThetaShape{SmoothstepAngle{}});
  const ModelParams p = params_for({Fractional{0.5, 1.0}}, 0.05, 20, 0.01);
  RegularStepper rs(p, init, RegularEps{});
  EXPECT_DOUBLE_EQ(step_coupled_eps(rs).t, p.dt);
  SingularStepper ss(p, init, SingularEvolution{});
  step_evolution_singular(ss);
  EXPECT_EQ(step_evolution_singular(ss).t, 2 * p.dt);
  EXPECT_EQ(ss.history().size(), 3u);
}

TEST(Dynamics, ResolveDtFollowsCfl) {
  ProblemSetup s;
  s.n_cells = 100;
  s.epsilon = 0.05;
  const double g0 = make_kernel(s.kernel, 0.05).eval(0.0);
  EXPECT_DOUBLE_EQ(resolve_dt(s), 0.5 * 0.01 / std::sqrt(g0));
  s.epsilon = 0.0;
  EXPECT_DOUBLE_EQ(resolve_dt(s), 0.5 * 0.01);
  s.dt = 0.002;
  EXPECT_EQ(resolve_dt(s), 0.002);
}
