#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lagtorus/minimizer.hpp"
#include "lagtorus/pendulum.hpp"

using namespace lagtorus;

namespace {

Lagrangian pendulum_only(double sigma) { return Lagrangian({1.0, 1.0}, sigma, 0.0, BumpField(0.0, 0.1)); }

Lagrangian with_bump(double sigma, double peak, double R) {
  return Lagrangian({1.0, 1.0}, sigma, 1.0, BumpField(peak, R));
}

// Time at which q1 crosses pi, by linear interpolation between nodes.
double crossing_time(const DiscretePath& p) {
  for (std::size_t i = 0; i + 1 < p.size(); ++i)
    if (p.nodes[i][0] <= kPi && p.nodes[i + 1][0] > kPi) {
      const double w = (kPi - p.nodes[i][0]) / (p.nodes[i + 1][0] - p.nodes[i][0]);
      return p.times[i] + w * p.h(i);
    }
  return -1;
}

}  // namespace

TEST(Minimizer, FreeRotorIsTheStraightLine) {
  const Lagrangian L({1.0, 2.0}, 0.0, 0.0, BumpField(0.0, 0.1));
  const Vec qa{0.3, -1.0}, qb{5.0, 4.0};
  const double T = 3.0;
  const auto r = minimize_fixed_endpoints(L, qa, qb, T, 64);
  ASSERT_TRUE(r.converged) << r.diagnostic;
  const double exact = 0.5 * (4.7 * 4.7 + 2.0 * 25.0) / T;
  EXPECT_NEAR(r.report.total_action, exact, 1e-12);
  EXPECT_NEAR(r.report.excess, 0.0, 1e-14);
  EXPECT_NEAR(velocity_deviation(r.path, {0, 1}), 0.0, 1e-12);
}

TEST(Minimizer, PendulumCrossesAtMidTimeWithTwoLegAction) {
  const double sigma = 0.5, T = 8.0;
  const auto L = pendulum_only(sigma);
  const Vec qa{0.0, 0.0}, qb{kTwoPi, 1.0};
  const auto r = minimize_fixed_endpoints(L, qa, qb, T, 800);
  ASSERT_TRUE(r.converged) << r.diagnostic;
  EXPECT_NEAR(crossing_time(r.path), T / 2, 1e-6);
  const double exact = two_leg_action(T / 2, 0, T, PendulumParams(sigma)) + 0.5 / T;
  const double h = T / 800;
  EXPECT_NEAR(r.report.total_action, exact, 5.0 * h * h);
  EXPECT_LE(r.report.el_residual, 1e-8);
}

TEST(Minimizer, ActionConvergesAtSecondOrder) {
  const double sigma = 0.5, T = 8.0;
  const auto L = pendulum_only(sigma);
  const Vec qa{0.0, 0.0}, qb{kTwoPi, 1.0};
  const double exact = two_leg_action(T / 2, 0, T, PendulumParams(sigma)) + 0.5 / T;
  Vec err;
  for (std::size_t N : {100, 200, 400}) {
    const auto r = minimize_fixed_endpoints(L, qa, qb, T, N);
    ASSERT_TRUE(r.converged);
    err.push_back(r.report.total_action - exact);
  }
  EXPECT_NEAR(std::log2(err[0] / err[1]), 2.0, 0.2);
  EXPECT_NEAR(std::log2(err[1] / err[2]), 2.0, 0.2);
}

TEST(Minimizer, GradientMatchesFiniteDifferencesAcrossTheBump) {
  const auto L = with_bump(0.3, 0.05, 0.2);
  // A wiggly path crossing supp v near (pi, 0).
  Vec times;
  std::vector<Vec> nodes;
  const std::size_t n = 41;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = double(i) / (n - 1);
    times.push_back(2.0 * s + 0.01 * std::sin(7.0 * s));
    nodes.push_back({kTwoPi * s + 0.05 * std::sin(9 * s), 0.3 * (s - 0.5) + 0.02 * std::cos(5 * s)});
  }
  DiscretePath p{times, nodes, {}};
  const auto ev = detail::evaluate_path(L, p, true);
  const double e = 1e-6;
  for (std::size_t i = 1; i + 1 < n; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      DiscretePath a = p, b = p;
      a.nodes[i][j] += e;
      b.nodes[i][j] -= e;
      const double fd = (discrete_action(L, a).total_action - discrete_action(L, b).total_action) / (2 * e);
      EXPECT_NEAR(ev.grad[i * 2 + j], fd, 1e-6 * (1 + std::abs(fd))) << i << "," << j;
    }
}

TEST(Minimizer, RandomPerturbationsNeverImprove) {
  const auto L = with_bump(0.2, 0.02, 0.3);
  const Vec qa{0.0, -0.4}, qb{kTwoPi, 0.6};
  const auto r = minimize_fixed_endpoints(L, qa, qb, 6.0, 300);
  ASSERT_TRUE(r.converged) << r.diagnostic;
  std::mt19937_64 rng(42);
  std::normal_distribution<double> G(0.0, 1e-3);
  for (int t = 0; t < 100; ++t) {
    DiscretePath q = r.path;
    for (std::size_t i = 1; i + 1 < q.size(); ++i)
      for (auto& x : q.nodes[i]) x += G(rng);
    EXPECT_GE(discrete_action(L, q).excess - r.report.excess, -1e-8);
  }
}

TEST(Minimizer, ThroughPointVisitsTheConstraint) {
  const auto L = with_bump(0.2, 0.02, 0.3);
  const Vec qa{0.0, -0.4}, qmid{kPi, 1.0}, qb{kTwoPi, 0.6};
  const double T = 6.0;
  const auto free = minimize_fixed_endpoints(L, qa, qb, T, 300);
  const auto r = minimize_through_point(L, qa, qmid, qb, T, 0.5, 300);
  ASSERT_TRUE(r.converged) << r.diagnostic;
  ASSERT_EQ(r.path.pinned.size(), 1u);
  EXPECT_EQ(r.path.pinned[0], r.glue_index);
  EXPECT_EQ(r.path.nodes[r.glue_index], qmid);
  EXPECT_NEAR(r.path.times[r.glue_index], r.t_mid, 1e-12);
  EXPECT_GE(r.report.excess, free.report.excess - 1e-10);
  // The optimal split is stationary: nudging it cannot lower the action.
  ThroughOptions fixed;
  fixed.optimize_split = false;
  for (double ds : {-0.01, 0.01}) {
    const auto s = minimize_through_point(L, qa, qmid, qb, T, r.split + ds, 300, {}, fixed);
    EXPECT_GE(s.report.excess, r.report.excess - 1e-10);
  }
}

TEST(Minimizer, GradedMeshShape) {
  const auto tau = graded_unit_mesh(100, 1e-5, 1.15, true);
  EXPECT_EQ(tau.front(), 0.0);
  EXPECT_EQ(tau.back(), 1.0);
  for (std::size_t i = 0; i + 1 < tau.size(); ++i) EXPECT_GT(tau[i + 1], tau[i]);
  EXPECT_NEAR(tau[tau.size() - 1] - tau[tau.size() - 2], 1e-5, 1e-12);
  for (std::size_t i = 1; i + 1 < tau.size(); ++i) {
    const double a = tau[i] - tau[i - 1], b = tau[i + 1] - tau[i];
    EXPECT_LE(std::max(a, b) / std::min(a, b), 1.15 + 1e-9);
  }
  const auto rev = graded_unit_mesh(100, 1e-5, 1.15, false);
  EXPECT_NEAR(rev[1], 1e-5, 1e-12);
  EXPECT_EQ(graded_unit_mesh(10, 0.0, 1.15, true).size(), 11u);
}

TEST(Minimizer, VelocityDeviationOfAKnownPath) {
  // Q(t) = t + 0.01 sin(t) on [0, 2 pi]; segment slopes span 1 +- 0.01.
  std::vector<Vec> nodes;
  const std::size_t n = 2001;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = kTwoPi * i / (n - 1);
    nodes.push_back({0.0, t + 0.01 * std::sin(t)});
  }
  const auto p = DiscretePath::uniform(0, kTwoPi, nodes);
  EXPECT_NEAR(velocity_deviation(p, {1}), 0.02, 1e-5);
  EXPECT_EQ(velocity_deviation(p, {0}), 0.0);
  EXPECT_THROW(velocity_deviation(p, {2}), PreconditionError);
}

TEST(Minimizer, RotationOrbitUsesACommensurateWindow) {
  const auto L = pendulum_only(0.1);
  const RotationVector w({0.5, 1.3});
  const auto ro = rotation_orbit(L, w, 10.0, 400);
  EXPECT_NEAR(std::fmod(ro.T * 0.5, kTwoPi), 0.0, 1e-12);
  EXPECT_EQ(ro.turns[0], 1);
  EXPECT_TRUE(ro.result.converged);
}

TEST(Minimizer, NonConvergenceIsReported) {
  const auto L = pendulum_only(0.5);
  MinimizerOptions opt;
  opt.max_iter = 2;
  const auto r = minimize_fixed_endpoints(L, {0.0, 0.0}, {kTwoPi, 1.0}, 8.0, 400, opt);
  EXPECT_FALSE(r.converged);
  EXPECT_FALSE(r.diagnostic.empty());
}

TEST(Minimizer, PreconditionsRaise) {
  const auto L = pendulum_only(0.5);
  EXPECT_THROW(minimize_fixed_endpoints(L, {0.0, 0.0}, {1.0, 1.0}, 1.0, 4), PreconditionError);
  EXPECT_THROW(minimize_fixed_endpoints(L, {0.0, 0.0}, {1.0, 1.0}, -1.0, 40), PreconditionError);
  EXPECT_THROW(minimize_fixed_endpoints(L, {0.0}, {1.0, 1.0}, 1.0, 40), PreconditionError);
  DiscretePath bad{{0.0, 1.0, 0.5}, {{0, 0}, {1, 1}, {2, 2}}, {}};
  EXPECT_THROW(bad.validate(), PreconditionError);
  const auto straight = DiscretePath::straight({0.0, 0.0}, {100.0, 0.0}, {0.0, 0.5, 1.0});
  EXPECT_THROW(discrete_action(L, straight, 10.0), PreconditionError);
  EXPECT_THROW(minimize_through_point(L, {0, 0}, {1, 1}, {2, 2}, 1.0, 1.5, 40), PreconditionError);
}
