#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "mvisco/experiments.hpp"

using namespace mvisco;
using std::numbers::pi;

namespace {

ProblemSetup small_coupled() {
  ProblemSetup s;
  s.n_cells = 40;
  s.T = 0.5;
  return s;
}

LatticeField random_field(std::size_t cells, std::size_t steps, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd;
  LatticeField f{{cells, steps}, {}};
  for (std::size_t n = 0; n <= steps; ++n) {
    Profile p(cells + 1);
    for (auto& x : p) x = nd(rng);
    f.levels.push_back(p);
  }
  return f;
}

}  // namespace

TEST(Experiments, ParallelMapIsOrderedAndPropagatesErrors) {
  const std::function<int(std::size_t)> sq = [](std::size_t i) { return static_cast<int>(i * i); };
  const auto a = parallel_map<int>(50, 1, sq);
  const auto b = parallel_map<int>(50, 8, sq);
  EXPECT_EQ(a, b);
  EXPECT_EQ(b[7], 49);
  const std::function<int(std::size_t)> bad = [](std::size_t i) -> int {
    if (i == 3) throw SolverFailure("boom");
    return 0;
  };
  EXPECT_THROW(parallel_map<int>(6, 3, bad), SolverFailure);
}

// Property: restriction is a projection.
TEST(Experiments, PropertyRestrictionIsProjection) {
  for (unsigned seed = 0; seed < 10; ++seed) {
    const LatticeField f = random_field(24, 12, seed);
    for (const Lattice target : {Lattice{12, 6}, Lattice{8, 4}, Lattice{24, 12}, Lattice{6, 3}}) {
      const LatticeField once = restrict_to_lattice(f, target);
      const LatticeField twice = restrict_to_lattice(once, target);
      EXPECT_EQ(once.lattice, target);
      EXPECT_EQ(once.levels, twice.levels);
    }
  }
  const LatticeField f = random_field(24, 12, 1);
  EXPECT_EQ(restrict_to_lattice(f, f.lattice).levels, f.levels);
  EXPECT_THROW(restrict_to_lattice(f, {10, 6}), InvalidArgument);
  EXPECT_THROW(restrict_to_lattice(f, {12, 5}), InvalidArgument);
}

TEST(Experiments, LatticeDistanceIsASymmetricMetric) {
  const LatticeField a = random_field(16, 8, 2), b = random_field(8, 4, 3);
  EXPECT_EQ(lattice_distance(a, a), 0.0);
  EXPECT_DOUBLE_EQ(lattice_distance(a, b), lattice_distance(b, a));
  EXPECT_GT(lattice_distance(a, b), 0.0);
}

TEST(Experiments, LogLogSlopeOfPowerLaw) {
  const std::vector<double> x{1e-1, 1e-2, 1e-3};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * std::pow(v, 0.5));
  EXPECT_NEAR(loglog_slope(x, y), 0.5, 1e-12);
  EXPECT_THROW(loglog_slope({1.0}, {1.0}), InvalidArgument);
}

TEST(Experiments, SweepValuesMustDescend) {
  EXPECT_THROW(epsilon_sweep(small_coupled(), {0.1, 0.2}), InvalidArgument);
  EXPECT_THROW(epsilon_sweep(small_coupled(), {0.1}), InvalidArgument);
  EXPECT_THROW(delta_sweep(small_coupled(), {0.1, 0.0}), InvalidArgument);
}

TEST(Experiments, ConstantKernelIsTranslationInvariant) {
  ProblemSetup s = small_coupled();
  s.kernel = {Constant{1.0}};
  const EpsilonSweep r = epsilon_sweep(s, {0.2, 0.1, 0.05}, 2);
  for (double d : r.result.u_diffs) EXPECT_LE(d, 1e-12);
  for (double d : r.result.m_diffs) EXPECT_LE(d, 1e-12);
  ASSERT_TRUE(r.singular_gap.has_value());
}

TEST(Experiments, FractionalSweepIsCauchy) {
  const EpsilonSweep r = epsilon_sweep(small_coupled(), {0.2, 0.1, 0.05, 0.025}, 4);
  EXPECT_TRUE(r.cauchy_decreasing);
  EXPECT_EQ(r.result.u_diffs.size(), 3u);
  EXPECT_EQ(r.result.bounds.size(), 4u);
  for (double d : r.result.u_diffs) EXPECT_GE(d, 0.0);
}

// Property: sweeps are bit-for-bit reproducible regardless of --jobs.
TEST(Experiments, PropertyDeterministicAcrossJobCounts) {
  const EpsilonSweep a = epsilon_sweep(small_coupled(), {0.2, 0.1, 0.05}, 1);
  const EpsilonSweep b = epsilon_sweep(small_coupled(), {0.2, 0.1, 0.05}, 4);
  EXPECT_EQ(a.result.u_diffs, b.result.u_diffs);
  EXPECT_EQ(a.result.m_diffs, b.result.m_diffs);
  EXPECT_EQ(*a.singular_gap, *b.singular_gap);
  ASSERT_EQ(a.result.records.size(), b.result.records.size());
  for (std::size_t i = 0; i < a.result.records.size(); ++i)
    EXPECT_EQ(a.result.records[i].number, b.result.records[i].number);
}

TEST(Experiments, DeltaSweepWithoutPenaltyActivity) {
  ProblemSetup s = small_coupled();
  s.lambda = 0.0;
  s.theta = ConstantAngle{1.0};
  const DeltaSweep r = delta_sweep(s, {1e-1, 1e-2, 1e-3});
  for (double m : r.penalty_measure) EXPECT_LE(m, 1e-14);
}

TEST(Experiments, DeltaSweepRespectsOwnBound) {
  const DeltaSweep r = delta_sweep(small_coupled(), {1e-1, 1e-2, 1e-3}, 3);
  EXPECT_TRUE(r.within_bound);
  ASSERT_TRUE(r.slope.has_value());
  EXPECT_GT(*r.slope, 0.0);
}

TEST(Experiments, WaveRefinementIsSecondOrder) {
  ProblemSetup s;
  s.kernel = {Constant{1.0}};
  s.epsilon = 0.0;
  s.lambda = 0.0;
  s.n_cells = 25;
  s.dt = 0.02;
  s.theta = ConstantAngle{0.0};
  const RefinementStudy r = refinement_study(
      s, 3, [](double x, double t) { return std::sin(pi * x) * std::sin(pi * t) / pi; }, std::nullopt, 3);
  ASSERT_EQ(r.result.observed_orders.size(), 2u);
  for (double o : r.result.observed_orders) EXPECT_GE(o, 1.8);
  EXPECT_EQ(r.n_cells, (std::vector<std::size_t>{25, 50, 100}));
}

TEST(Experiments, SingularRefinementSelfConverges) {
  ProblemSetup s;
  s.epsilon = 0.0;
  s.mode = SimulationMode::SingularEvolution;
  s.n_cells = 50;
  s.dt = 0.01;
  const RefinementStudy r = refinement_study(s, 4, {}, std::nullopt, 4);
  ASSERT_EQ(r.result.observed_orders.size(), 2u);
  for (double o : r.result.observed_orders) EXPECT_GE(o, 0.8);
}
