#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "mvisco/diagnostics.hpp"
#include "mvisco/setup.hpp"

using namespace mvisco;
using std::numbers::pi;

namespace {

Trajectory wave_run(std::size_t n, SimulationMode mode = SimulationMode::RegularEps) {
  ProblemSetup s;
  s.kernel = {Constant{1.0}};
  s.epsilon = 0.0;
  s.lambda = 0.0;
  s.n_cells = n;
  s.dt = 0.5 / static_cast<double>(n);
  s.theta = ConstantAngle{0.0};
  s.mode = mode;
  return run_setup(s);
}

Trajectory zero_run(SimulationMode mode, double eps) {
  ProblemSetup s;
  s.epsilon = eps;
  s.n_cells = 16;
  s.dt = 0.01;
  s.u1 = ZeroProfile{};
  s.theta = ConstantAngle{0.4};
  s.mode = mode;
  return run_setup(s);
}

Trajectory coupled_run(std::size_t n, double eps, Forcing f = ZeroForcing{}) {
  ProblemSetup s;
  s.epsilon = eps;
  s.n_cells = n;
  s.dt = 0.5 / static_cast<double>(n) / std::sqrt(make_kernel(s.kernel, 0.05).eval(0.0));
  s.forcing = std::move(f);
  s.mode = eps > 0 ? SimulationMode::RegularEps : SimulationMode::SingularEvolution;
  return run_setup(s);
}

const TestFunction kPhi{SpatialShape::Sine, 1, TemporalShape::Linear};
const VectorTestFunction kPsi{{SpatialShape::Sine, 1, TemporalShape::Linear},
                              {SpatialShape::Zero, 1, TemporalShape::Linear}};

}  // namespace

TEST(Diagnostics, InitialEnergyOfSineVelocity) {
  const Trajectory t = wave_run(50);
  const EnergyEntry e = energy(t, 0);
  EXPECT_NEAR(e.total, 0.25, 1e-14);
  EXPECT_EQ(e.elastic, 0.0);
  EXPECT_EQ(e.exchange, 0.0);
  EXPECT_LT(e.penalty, 1e-30);
  EXPECT_THROW(energy(t, t.n_levels()), InvalidArgument);
}

TEST(Diagnostics, ExchangeEnergyOfSmoothstepAngle) {
  auto integrand = [](double x) {
    const double d = 6 * pi * x * (1 - x);
    return 0.5 * d * d;
  };
  const double oracle = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, 0.0, 1.0);
  ASSERT_NEAR(oracle, 3 * pi * pi / 5, 1e-12);
  ProblemSetup s;
  s.n_cells = 400;
  s.dt = 0.001;
  s.T = 0.001;
  s.theta = SmoothstepAngle{pi};
  s.mode = SimulationMode::SingularEvolution;
  s.epsilon = 0.0;
  EXPECT_NEAR(energy(run_setup(s), 0).exchange, oracle, 1e-4);
}

TEST(Diagnostics, StationaryRunHasZeroEnergyTerms) {
  const Trajectory t = zero_run(SimulationMode::SingularEvolution, 0.0);
  for (const EnergyEntry& e : energy_report(t)) {
    EXPECT_LE(std::abs(e.kinetic), 1e-24);
    EXPECT_LE(std::abs(e.elastic), 1e-24);
    EXPECT_LE(std::abs(e.exchange), 1e-24);
    EXPECT_LE(std::abs(e.dissipation), 1e-24);
    EXPECT_LE(std::abs(e.work), 1e-24);
  }
  EXPECT_LE(check_lemma21(t).max_residual, 1e-24);
  EXPECT_LT(check_lemma22(t).max_residual, 1e-25);
  for (double c : apriori_bounds(t).as_array()) EXPECT_LT(c, 1e-25);
}

// Property: the terms that are integrals of squares never go negative.
TEST(Diagnostics, PropertyEnergyTermsNonnegative) {
  for (const Trajectory& t : {coupled_run(40, 0.05, SinusoidalForcing{3.0, 2, 5.0}), coupled_run(40, 0.0)})
    for (const EnergyEntry& e : energy_report(t)) {
      EXPECT_GE(e.kinetic, 0.0);
      EXPECT_GE(e.elastic, 0.0);
      EXPECT_GE(e.exchange, 0.0);
      EXPECT_GE(e.penalty, 0.0);
      EXPECT_GE(e.dissipation, 0.0);
      EXPECT_TRUE(std::isfinite(e.total));
    }
}

// K in monitor_tolerance was fixed once from this run: the constant-kernel
// wave problem at N = 200, dt = h/2 has max residual 3.9e-6, i.e.
// residual / (h^2 + dt) = 1.5e-3, rounded up to K = 2e-3.
TEST(Diagnostics, MonitorConstantCoversWaveCalibration) {
  const InequalityReport r = check_lemma21(wave_run(200));
  EXPECT_TRUE(r.pass);
  EXPECT_GT(r.max_residual, 0.5 * r.tolerance);
}

TEST(Diagnostics, Lemma21ShrinksUnderRefinementOnWaveRun) {
  const double coarse = check_lemma21(wave_run(50)).max_residual;
  const double fine = check_lemma21(wave_run(100)).max_residual;
  EXPECT_GT(coarse, 0.0);
  EXPECT_GE(coarse / fine, 1.5);
}

TEST(Diagnostics, Lemma21PronyWithForcing) {
  ProblemSetup s;
  s.kernel = {PronySeries{{{1.0, 2.0}, {0.5, 0.1}}}};
  s.epsilon = 0.0;
  s.n_cells = 100;
  s.forcing = SinusoidalForcing{1.0, 1, 0.0};
  s.mode = SimulationMode::ViscoelasticOnly;
  const Trajectory t = run_setup(s);
  const InequalityReport r = check_lemma21(t);
  const EnergyReport e = energy_report(t);
  EXPECT_LE(r.max_residual, 1e-2 * (e.front().kinetic + e.back().work));
  EXPECT_TRUE(r.pass);
}

TEST(Diagnostics, Lemma22RequiresCoupledRun) {
  ProblemSetup s;
  s.n_cells = 16;
  s.epsilon = 0.0;
  s.mode = SimulationMode::ViscoelasticOnly;
  EXPECT_THROW(check_lemma22(run_setup(s)), ModeMismatch);
}

TEST(Diagnostics, Lemma22HoldsWithLargeForcing) {
  for (double eps : {0.05, 0.0}) {
    const Trajectory t = coupled_run(50, eps, SinusoidalForcing{50.0, 1, 4.0});
    EXPECT_TRUE(check_lemma22(t).pass);
    EXPECT_TRUE(check_lemma21(t).pass);
  }
}

TEST(Diagnostics, AprioriBoundsOfWaveRun) {
  const AprioriBounds b = apriori_bounds(wave_run(200));
  EXPECT_NEAR(b.c1, 0.5, 5e-3);
  EXPECT_NEAR(b.c2, 0.5, 5e-3);
  EXPECT_LE(b.c3, 1e-20);
}

TEST(Diagnostics, GronwallOnCoupledRun) {
  const Trajectory t = coupled_run(50, 0.05);
  const GronwallReport g = gronwall_check(energy_report(t), t.grid().h, t.dt());
  EXPECT_TRUE(g.pass);
  EXPECT_GT(g.budget, 0.0);
}

TEST(Diagnostics, WeakResidualVanishesOnZeroTrajectory) {
  for (const auto& [mode, eps] : std::vector<std::pair<SimulationMode, double>>{
           {SimulationMode::RegularEps, 0.05}, {SimulationMode::SingularEvolution, 0.0}}) {
    ProblemSetup s;
    s.epsilon = eps;
    s.n_cells = 32;
    s.dt = 0.01;
    s.u1 = ZeroProfile{};
    s.theta = ConstantAngle{0.0};
    s.mode = mode;
    const WeakResidual r = weak_residual(run_setup(s), kPhi, kPsi);
    EXPECT_LE(std::abs(r.displacement), 1e-10);
    EXPECT_LE(std::abs(r.magnetization), 1e-10);
  }
}

TEST(Diagnostics, WeakResidualRejectsInadmissibleTests) {
  const Trajectory t = wave_run(20);
  EXPECT_THROW(weak_residual(t, {SpatialShape::Cosine, 1, TemporalShape::Linear}, kPsi),
               InvalidTestFunction);
  EXPECT_THROW(weak_residual(t, {SpatialShape::Sine, 1, TemporalShape::Constant}, kPsi),
               InvalidTestFunction);
  EXPECT_THROW(weak_residual(t, kPhi, {{SpatialShape::Cosine, 1, TemporalShape::Constant}}),
               InvalidTestFunction);
  EXPECT_NO_THROW(weak_residual(t, {SpatialShape::Bump, 1, TemporalShape::Linear},
                                {{SpatialShape::Cosine, 2, TemporalShape::Linear}}));
}

TEST(Diagnostics, WeakResidualDecreasesUnderRefinement) {
  const WeakResidual coarse = weak_residual(wave_run(50), kPhi, kPsi);
  const WeakResidual fine = weak_residual(wave_run(100), kPhi, kPsi);
  EXPECT_LT(std::abs(fine.displacement), std::abs(coarse.displacement));
  EXPECT_GE(std::log2(std::abs(coarse.displacement) / std::abs(fine.displacement)), 1.0);

  const WeakResidual c2 = weak_residual(coupled_run(40, 0.0), kPhi, kPsi);
  const WeakResidual f2 = weak_residual(coupled_run(80, 0.0), kPhi, kPsi);
  EXPECT_LT(std::abs(f2.displacement), std::abs(c2.displacement));
  EXPECT_LT(std::abs(f2.magnetization), std::abs(c2.magnetization));
}
