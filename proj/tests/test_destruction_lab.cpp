#include <gtest/gtest.h>

#include <cmath>

#include "lagtorus/destruction_lab.hpp"
#include "lagtorus/diophantine.hpp"

using namespace lagtorus;

namespace {

PerturbationSpec working_spec(double n, double peak_scale = 1.0) {
  const auto w = golden_working_rotation(n);
  PerturbationSpec sp;
  sp.n = n;
  sp.a = 1;
  sp.s = 1;
  sp.d = 2;
  sp.omega1_abs = w[0];
  sp.peak_scale = peak_scale;
  return sp;
}

}  // namespace

TEST(DestructionLab, WindowGeometry) {
  const auto w = golden_working_rotation(8);
  const auto win = lab_window(w);
  EXPECT_NEAR(win.T * w[0], kTwoPi, 1e-12);
  EXPECT_EQ(win.qa[0], 0.0);
  EXPECT_EQ(win.qb[0], kTwoPi);
  EXPECT_NEAR(win.qb[1] - win.qa[1], w[1] * win.T, 1e-9);
  // The straight chord passes through q* at T/2.
  EXPECT_NEAR(0.5 * (win.qa[1] + win.qb[1]), win.q_star[1], 1e-12);
  EXPECT_EQ(win.q_plus[1], kPi);
  EXPECT_EQ(win.q_minus[1], -kPi);
}

TEST(DestructionLab, GoldenWorkingRotationSatisfiesTheRegime) {
  for (double n : {8.0, 16.0, 32.0, 64.0}) {
    const auto w = golden_working_rotation(n);
    EXPECT_NO_THROW(check_regime(working_spec(n), w, 0.1));
    EXPECT_NEAR(w[0] * n, std::sqrt((1 + kGolden * kGolden) / 5), 1e-14);
  }
}

TEST(DestructionLab, RegimeViolationsRaise) {
  auto sp = working_spec(16);
  sp.a = 3;  // |omega_1| no longer below n^(-a/2 - eps)
  EXPECT_THROW(check_regime(sp, golden_working_rotation(16), 0.1), PreconditionError);
  EXPECT_THROW(time_shift_budget(sp, 1.0, 2.0, sp.omega1_abs, 100.0), PreconditionError);
  // |omega_2| / n outside [1/4, 4].
  const auto sp16 = working_spec(16);
  EXPECT_THROW(check_regime(sp16, RotationVector({sp16.omega1_abs, 100.0 * 16}), 0.1), PreconditionError);
  // Spec and rotation vector disagree on |omega_1|.
  EXPECT_THROW(check_regime(sp16, golden_working_rotation(17), 0.1), PreconditionError);
}

TEST(DestructionLab, CertificateAtSmallScale) {
  const double n = 8;
  const auto w = golden_working_rotation(n);
  const auto c = certify_gap(working_spec(n), w);
  ASSERT_TRUE(c.converged) << c.diagnostic;
  EXPECT_TRUE(c.endpoints_match);
  EXPECT_EQ(c.verdict, Verdict::gap) << c.diagnostic;
  EXPECT_GT(c.gap, 0.0);
  EXPECT_GE(c.gap, c.bump.lower_bound - c.shift_bound);
  EXPECT_GT(c.bump.cost, 10.0 * c.shift_bound);
  EXPECT_GE(c.bump.cost, c.bump.lower_bound);
  EXPECT_TRUE(c.avoidance.avoids);
  EXPECT_NEAR(c.window_ratio, 1.0, 1e-12);
  EXPECT_LE(c.el_residual, 1e-8 * 10);
  // The detour competitor and the direct minimizer agree on the unconstrained
  // value up to the difference between the graded and the uniform mesh.
  EXPECT_NEAR(c.A_detour, c.A_direct, 1e-5 * std::abs(c.A_direct));
  // The through path visits q* at its glue node.
  EXPECT_EQ(c.through.path.nodes[c.through.glue_index], lab_window(w).q_star);
  EXPECT_TRUE(std::isfinite(c.lambda));
}

TEST(DestructionLab, NoBumpNoGap) {
  const double n = 8;
  const auto c = certify_gap(working_spec(n, 0.0), golden_working_rotation(n));
  EXPECT_TRUE(c.converged);
  EXPECT_EQ(c.verdict, Verdict::no_gap);
  EXPECT_NEAR(c.gap, 0.0, 1e-9);
  EXPECT_EQ(std::string(to_string(c.verdict)), "false");
}

TEST(DestructionLab, BumpCostNeedsAPathThroughQStar) {
  const auto sp = working_spec(8);
  const auto win = lab_window(golden_working_rotation(8));
  // Straight path shifted off q* by 10 R in q1.
  Vec qa = win.qa, qb = win.qb;
  qa[0] += 10 * sp.R();
  qb[0] += 10 * sp.R();
  Vec times;
  for (int i = 0; i <= 64; ++i) times.push_back(win.T * i / 64.0);
  const auto p = DiscretePath::straight(qa, qb, times);
  EXPECT_THROW(bump_crossing_cost(sp, p), PreconditionError);
  EXPECT_TRUE(avoidance_check(sp, p).avoids);
}

TEST(DestructionLab, ShiftBudgetIsTheEnergyBound) {
  const auto sp = working_spec(16);
  const auto w = golden_working_rotation(16);
  const double T = kTwoPi / w[0];
  const double b = time_shift_budget(sp, T / 2, T / 2 + 0.1, w[0], T);
  const PendulumParams p(sp.sigma());
  const double emax = std::max(energy_from_time(T / 2 - 0.1, p), energy_from_time(T / 2 + 0.1, p));
  EXPECT_NEAR(b, 0.1 * emax, 1e-6 * b);
  EXPECT_EQ(time_shift_budget(sp, 1.0, 1.0, w[0], T), 0.0);
}

TEST(DestructionLab, GapScanPaysOnlyInsideTheSupport) {
  const double n = 8;
  const auto sp = working_spec(n);
  const auto w = golden_working_rotation(n);
  const auto c = certify_gap(sp, w);
  const auto rows = torus_gap_scan(sp, w, {{0.0, 0.0}, {1.5, 0.0}, {0.0, 0.5}}, c.A_unconstrained);
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& r : rows) EXPECT_TRUE(r.converged);
  EXPECT_NEAR(rows[0].excess, c.gap, 1e-9);
  // Through (pi + 1.5 R, 0): the q2 sweep misses the support.
  EXPECT_LT(rows[1].excess, 0.01 * rows[0].excess);
  EXPECT_GT(rows[2].excess, 0.5 * rows[0].excess);
}

TEST(DestructionLab, FrameEntryUsesKOmega) {
  const RotationVector g({1.0, kGolden});
  const auto f = build_frame({8, -5}, g);
  const auto ww = working_rotation_from_frame(f, g);
  EXPECT_NEAR(ww[0], std::abs(8 - 5 * kGolden), 1e-14);
  const auto sp = spec_for_frame(f, 1.0, 1.0, 4.5);
  EXPECT_NO_THROW(check_regime(sp, ww, 0.1));
  EXPECT_NEAR(ww[1] / sp.n, std::sqrt(1 + kGolden * kGolden), 0.05);
}

TEST(DestructionLab, DecayLawsSeparate) {
  const RotationVector g({1.0, kGolden});
  std::vector<Approximant> tail;
  for (const auto& a : find_approximants(g, 30, 1.0))
    if (a.norm > 5) tail.push_back(a);
  ASSERT_GE(tail.size(), 3u);
  const auto dl = decay_laws(g, tail, 1.0, 1.0);
  for (const auto& r : dl.rows) EXPECT_EQ(r.verdict, Verdict::gap);
  EXPECT_GE(dl.shift_fit.r_squared, 0.99);
  EXPECT_GE(dl.bump_fit.r_squared, 0.99);
  EXPECT_LT(dl.shift_fit.slope, 0.0);
  EXPECT_GT(dl.bump_fit.slope, 0.0);
}

TEST(DestructionLab, DetourPointsFollowTheChordInHigherDimensions) {
  const RotationVector w({0.05, 3.0, 6.0});
  const auto win = lab_window(w);
  EXPECT_EQ(win.q_plus[0], kPi);
  EXPECT_EQ(win.q_plus[1], kPi);
  EXPECT_NEAR(win.q_plus[2], 2 * kPi, 1e-12);
  EXPECT_EQ(win.q_minus[2], -win.q_plus[2]);
}

TEST(DestructionLab, CubeRootFrameCertifies) {
  const RotationVector w({1.0, std::cbrt(2.0), std::cbrt(4.0)});
  const auto f = build_frame({2, 1, -2}, w);
  const auto sp = spec_for_frame(f, 2.0, 1.0, 4.5);
  const auto c = certify_gap(sp, f, w);
  ASSERT_TRUE(c.converged) << c.diagnostic;
  EXPECT_EQ(c.verdict, Verdict::gap);
  EXPECT_GT(c.gap, 0.0);
  EXPECT_GT(c.bump.cost, 10.0 * c.shift_bound);
}
