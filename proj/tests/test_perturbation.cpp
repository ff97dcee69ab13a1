#include <gtest/gtest.h>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <random>

#include "lagtorus/diophantine.hpp"
#include "lagtorus/perturbation.hpp"

using namespace lagtorus;

namespace {

PerturbationSpec spec16() {
  PerturbationSpec sp;
  sp.n = 16;
  sp.a = 1;
  sp.s = 1;
  sp.omega1_abs = 0.3;
  return sp;
}

// Integral of v along qa -> qb in time h by tanh-sinh over the support chord.
double oracle_segment(const BumpField& b, const Vec& qa, const Vec& qb, double h) {
  boost::math::quadrature::tanh_sinh<double> ts;
  auto f = [&](double t) { return b.value(qa[0] + t * (qb[0] - qa[0]), qa[1] + t * (qb[1] - qa[1])); };
  // Bracket the support so tanh-sinh sees a smooth integrand.
  const int M = 4000;
  double lo = 1, hi = 0;
  for (int i = 0; i <= M; ++i) {
    const double t = double(i) / M;
    if (f(t) > 0) {
      lo = std::min(lo, t);
      hi = std::max(hi, t);
    }
  }
  if (hi < lo) return 0.0;
  lo = std::max(0.0, lo - 1.0 / M);
  hi = std::min(1.0, hi + 1.0 / M);
  return h * ts.integrate(f, lo, hi);
}

}  // namespace

TEST(Perturbation, DerivedConstants) {
  const auto sp = spec16();
  EXPECT_DOUBLE_EQ(sp.sigma(), 1.0 / 16);
  EXPECT_DOUBLE_EQ(sp.R(), 0.3 / 256);
  EXPECT_DOUBLE_EQ(sp.peak(), 0.3);
  auto bad = sp;
  bad.s_prime = 4.0;
  EXPECT_THROW(bad.validate(), PreconditionError);
}

TEST(Perturbation, BumpSupportTooLargeRaises) {
  PerturbationSpec sp;
  sp.n = 1;
  sp.omega1_abs = 2.0;  // R = 2 >= pi/2
  EXPECT_THROW(build_bump(sp), PreconditionError);
}

TEST(Perturbation, BumpShapeAndSupport) {
  const BumpField b(2.0, 0.1);
  EXPECT_DOUBLE_EQ(b.value(kPi, 0), 2.0);
  EXPECT_EQ(b.value(kPi + 0.1, 0), 0.0);
  EXPECT_EQ(b.value(kPi + 0.07, 0.08), 0.0);
  EXPECT_GT(b.value(kPi + 0.05, 0.05), 0.0);
  // Periodic images.
  EXPECT_DOUBLE_EQ(b.value(kPi + kTwoPi, -kTwoPi), 2.0);
  EXPECT_NEAR(b.value(kPi + 0.03, 0.01), b.value(3 * kPi + 0.03, 4 * kPi + 0.01), 1e-13);
  // Radial profile exp(1 - 1/(1 - t^2)) at t = 1/2.
  EXPECT_NEAR(b.value(kPi + 0.05, 0), 2.0 * std::exp(1.0 - 1.0 / 0.75), 1e-14);
}

TEST(Perturbation, BumpJetMatchesFiniteDifferences) {
  const BumpField b(1.3, 0.2);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(-0.18, 0.18);
  for (int t = 0; t < 50; ++t) {
    const double x = kPi + U(rng), y = U(rng);
    const auto j = b.jet(x, y);
    const double h = 1e-6;
    const double gx = (b.value(x + h, y) - b.value(x - h, y)) / (2 * h);
    const double gy = (b.value(x, y + h) - b.value(x, y - h)) / (2 * h);
    EXPECT_NEAR(j.grad[0], gx, 1e-6 * (1 + std::abs(gx)));
    EXPECT_NEAR(j.grad[1], gy, 1e-6 * (1 + std::abs(gy)));
    const auto jx = b.jet(x + h, y), jmx = b.jet(x - h, y);
    EXPECT_NEAR(j.hess[0][0], (jx.grad[0] - jmx.grad[0]) / (2 * h), 1e-4 * (1 + std::abs(j.hess[0][0])));
    EXPECT_NEAR(j.hess[1][0], (jx.grad[1] - jmx.grad[1]) / (2 * h), 1e-4 * (1 + std::abs(j.hess[1][0])));
    EXPECT_DOUBLE_EQ(j.hess[0][1], j.hess[1][0]);
  }
}

TEST(Perturbation, SegmentIntegralMatchesIndependentQuadrature) {
  const BumpField b(0.7, 0.05);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(-0.12, 0.12);
  int hit = 0;
  for (int t = 0; t < 60; ++t) {
    const Vec qa{kPi + U(rng), U(rng)}, qb{kPi + U(rng), U(rng)};
    const double h = 0.37;
    const auto s = b.segment(qa.data(), qb.data(), h);
    const double ref = oracle_segment(b, qa, qb, h);
    if (ref > 0) ++hit;
    EXPECT_NEAR(s.value, ref, 1e-10 * (1e-3 + ref));
  }
  EXPECT_GT(hit, 10);
}

TEST(Perturbation, SegmentGradientMatchesFiniteDifferences) {
  const BumpField b(0.7, 0.05);
  const Vec qa{kPi - 0.04, -0.01}, qb{kPi + 0.03, 0.02};
  const double h = 0.5, e = 1e-6;
  const auto s = b.segment(qa.data(), qb.data(), h);
  for (int i = 0; i < 2; ++i) {
    Vec ap = qa, am = qa, bp = qb, bm = qb;
    ap[i] += e;
    am[i] -= e;
    bp[i] += e;
    bm[i] -= e;
    const double ga = (b.segment(ap.data(), qb.data(), h, false).value -
                       b.segment(am.data(), qb.data(), h, false).value) / (2 * e);
    const double gb = (b.segment(qa.data(), bp.data(), h, false).value -
                       b.segment(qa.data(), bm.data(), h, false).value) / (2 * e);
    EXPECT_NEAR(s.grad_a[i], ga, 1e-6 * (1 + std::abs(ga)));
    EXPECT_NEAR(s.grad_b[i], gb, 1e-6 * (1 + std::abs(gb)));
  }
}

TEST(Perturbation, LongSegmentsSeeEveryImage) {
  const BumpField b(1.0, 0.05);
  // Vertical line q1 = pi over three q2 turns crosses three images.
  const Vec qa{kPi, -0.5}, qb{kPi, 3 * kTwoPi - 0.5};
  const auto s = b.segment(qa.data(), qb.data(), 1.0, false);
  const Vec ca{kPi, -0.5}, cb{kPi, 0.5};
  const double one = b.segment(ca.data(), cb.data(), 1.0 / (3 * kTwoPi), false).value;
  EXPECT_NEAR(s.value, 3 * one, 1e-12);
  EXPECT_NEAR(BumpField::segment_time_within(qa.data(), qb.data(), 1.0, 0.05), 3 * 0.1 / (3 * kTwoPi), 1e-12);
  EXPECT_NEAR(BumpField::segment_distance(qa.data(), qb.data()), 0.0, 1e-15);
}

TEST(Perturbation, LagrangianGradientMatchesFiniteDifferences) {
  const auto sp = spec16();
  const auto L = full_lagrangian(sp);
  const Vec q{kPi + 0.3 * sp.R(), -0.2 * sp.R()};
  const auto g = L.grad_q(q);
  for (int i = 0; i < 2; ++i) {
    const double h = 1e-4 * sp.R();
    Vec p = q, m = q;
    p[i] += h;
    m[i] -= h;
    EXPECT_NEAR(g[i], (L.potential(p) - L.potential(m)) / (2 * h), 1e-5 * (1 + std::abs(g[i])));
  }
  const Vec qd{0.3, -1.2};
  EXPECT_DOUBLE_EQ(L.kinetic(qd), 0.5 * (0.09 + 1.44));
  EXPECT_EQ(L.grad_qd(qd), qd);
}

TEST(Perturbation, TransformedPotentialIsTheComposition) {
  const RotationVector w({1.0, kGolden});
  const auto f = build_frame({8, -5}, w);
  auto sp = spec_for_frame(f, 1.0, 1.0, 4.5);
  const TransformedPotential P(sp, f);
  const auto b = build_bump(sp);
  const double k2 = 89.0;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> U(0, kTwoPi);
  for (int t = 0; t < 40; ++t) {
    // Points near the support (through q = q* + small) and at random.
    Vec x{U(rng), U(rng)};
    if (t % 2 == 0) {
      const double q1 = kPi + 0.5 * sp.R(), q2 = -0.3 * sp.R();
      x = {(8 * q1 + 5 * q2) / k2, (-5 * q1 + 8 * q2) / k2};
    }
    const double q1 = 8 * x[0] - 5 * x[1], q2 = f.kprime()[0] * x[0] + f.kprime()[1] * x[1];
    const double expect = std::pow(k2, -1.5) * (1 - std::cos(q1)) + b.value(q1, q2) / k2;
    const auto j = P.jet(x);
    EXPECT_NEAR(j.value, expect, 1e-14);
    const double h = 1e-4 * sp.R() / 8;
    for (int i = 0; i < 2; ++i) {
      Vec p = x, m = x;
      p[i] += h;
      m[i] -= h;
      const double fd = (P.value(p) - P.value(m)) / (2 * h);
      EXPECT_NEAR(j.grad[i], fd, 1e-5 * (1e-6 + std::abs(fd)));
    }
  }
}

TEST(Perturbation, CosineNormsAreExactOnAlignedGrid) {
  const CosineField c({2, -1});
  const auto g = torus_grid(2, 128);
  EXPECT_NEAR(cr_norm(c, 0, g), 2.0, 1e-14);
  EXPECT_NEAR(cr_norm(c, 1, g), 2.0, 1e-14);
  EXPECT_NEAR(cr_norm(c, 2, g), 4.0, 1e-14);
  // Orders 3 and 4 come from central differences with step (2 pi / 128) / 16,
  // relative error about (step * |k|)^2 / 6.
  EXPECT_NEAR(cr_norm(c, 3, g), 8.0, 8.0 * 2e-5);
  EXPECT_NEAR(cr_norm(c, 4, g), 16.0, 16.0 * 2e-5);
}

TEST(Perturbation, NormRaisesWhenGridMissesTheSupport) {
  const BumpAsField bump(BumpField(1.0, 1e-4));
  auto g = torus_grid(2, 16);
  // Shift the grid off q*.
  for (auto& p : g.points) p[0] += 0.1;
  EXPECT_THROW(cr_norm(bump, 0, g), PreconditionError);
  EXPECT_THROW(cr_norm(bump, 5, torus_grid(2, 16)), PreconditionError);
}

TEST(Perturbation, BumpNormsScaleWithRadius) {
  // ||v||_{C^r} ~ peak / R^r for a fixed profile.
  for (int r : {0, 1, 2}) {
    const double R1 = 0.02, R2 = 0.01;
    const BumpAsField b1(BumpField(1.0, R1)), b2(BumpField(1.0, R2));
    SampleGrid g1, g2;
    add_patch(g1, BumpField::center(), 1.25 * R1, 97);
    add_patch(g2, BumpField::center(), 1.25 * R2, 97);
    const double ratio = cr_norm(b2, r, g2) / cr_norm(b1, r, g1);
    EXPECT_NEAR(ratio, std::pow(2.0, r), 1e-9 * std::pow(2.0, r));
  }
}

TEST(Perturbation, NormDecayFollowsTheFrameScaling) {
  const RotationVector w({1.0, kGolden});
  const auto seq = find_approximants(w, 100, 1.0);
  const auto rep = norm_decay_report(w, seq, 1.0, {0, 1}, 12.0, 4.5);
  ASSERT_EQ(rep.slopes.size(), 2u);
  EXPECT_NEAR(rep.slopes[0], -3.0, 0.15 * 3.0);
  EXPECT_NEAR(rep.slopes[1], -2.0, 0.15 * 2.0);
  for (const auto& row : rep.rows) EXPECT_LT(row.refined_change, 0.01) << row.k_norm << " r=" << row.r;
  EXPECT_THROW(norm_decay_report(w, {seq[0], seq[1]}, 1.0, {0}, 12.0, 4.5), PreconditionError);
}
