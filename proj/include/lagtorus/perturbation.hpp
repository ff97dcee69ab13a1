#pragma once

// Perturbation fields and Lagrangians of the destruction construction:
//
//   working system   L = |qdot|^2/2 + sigma (1 - cos q1) + v(q1, q2)
//   frame system     L = sum_i qdot_i^2 / (2 |row_i|^2)
//                        + |k|^-2 (|k|^-a (1 - cos q1) + v(q1, q2))
//   x-side potential P(x) = |k|^-(a+2) (1 - cos<k,x>) + |k|^-2 v(<k,x>, <k',x>)
//
// v is a radial C^infinity bump of height `peak` and radius R centred at
// q* = (pi, 0), periodised with period 2 pi in both arguments.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "lagtorus/common.hpp"
#include "lagtorus/diophantine.hpp"
#include "lagtorus/lattice_frame.hpp"
#include "lagtorus/quadrature.hpp"

namespace lagtorus {

struct PerturbationSpec {
  double n = 16;        // scale parameter (|k_n| on the frame side)
  double a = 1;         // pendulum exponent, sigma = n^-a
  double s = 1;         // peak exponent, peak = |omega_1|^s
  double s_prime = 4.5; // nominal norm exponent, reported only
  int d = 2;
  double omega1_abs = 0.05;
  double peak_scale = 1;  // multiplies the peak; 0 switches the bump off

  double sigma() const { return std::pow(n, -a); }
  double R() const { return omega1_abs / (n * n); }
  double peak() const { return peak_scale * std::pow(omega1_abs, s); }

  void validate() const {
    require(n >= 1 && std::isfinite(n), "perturbation: n must be >= 1");
    require(a > 0, "perturbation: a must be positive");
    require(s_prime > 4, "perturbation: s' must exceed 4");
    require(d >= 2, "perturbation: d must be >= 2");
    require(omega1_abs > 0 && std::isfinite(omega1_abs), "perturbation: |omega_1| must be > 0");
    require(peak_scale >= 0, "perturbation: peak_scale must be >= 0");
  }
};

// Spec for the frame-side system: n -> |k|, |omega_1| -> |<k, omega>|.
inline PerturbationSpec spec_for_frame(const LatticeFrame& f, double a, double s,
                                       double s_prime) {
  PerturbationSpec sp;
  sp.n = inorm(f.k());
  sp.a = a;
  sp.s = s;
  sp.s_prime = s_prime;
  sp.d = static_cast<int>(f.dim());
  sp.omega1_abs = std::abs(f.k_inner_omega);
  sp.validate();
  return sp;
}

// Value, gradient and Hessian of a scalar field at a point.
struct Jet2 {
  double value = 0;
  Vec grad;
  std::vector<Vec> hess;

  explicit Jet2(std::size_t d = 0) : grad(d, 0.0), hess(d, Vec(d, 0.0)) {}
};

class BumpField {
 public:
  BumpField() = default;
  explicit BumpField(const PerturbationSpec& sp)
      : peak_(sp.peak()), radius_(sp.R()) {
    sp.validate();
    if (!(radius_ < kPi / 2))
      throw PreconditionError("build_bump: R = " + std::to_string(radius_) +
                              " >= pi/2, support would overlap its periodic images");
  }
  BumpField(double peak, double radius) : peak_(peak), radius_(radius) {
    require(peak >= 0 && radius > 0, "bump: need peak >= 0 and R > 0");
    if (!(radius < kPi / 2)) throw PreconditionError("build_bump: R >= pi/2");
  }

  double peak() const { return peak_; }
  double radius() const { return radius_; }
  bool active() const { return peak_ > 0; }
  static constexpr std::array<double, 2> center() { return {kPi, 0.0}; }

  // Periodic displacement from the nearest image of q*.
  static std::array<double, 2> offset(double q1, double q2) {
    return {wrap_pi(q1 - kPi), wrap_pi(q2)};
  }

  double periodic_distance(double q1, double q2) const {
    const auto o = offset(q1, q2);
    return std::hypot(o[0], o[1]);
  }

  // Profile phi(t) = exp(1 - 1/(1 - t^2)) as a function of t^2.
  static double profile_sq(double t2) { return t2 < 1 ? std::exp(1.0 - 1.0 / (1.0 - t2)) : 0.0; }

  double value(double q1, double q2) const {
    if (!active()) return 0.0;
    const auto o = offset(q1, q2);
    return peak_ * profile_sq((o[0] * o[0] + o[1] * o[1]) / (radius_ * radius_));
  }

  // Exact partials up to order two in (q1, q2).
  Jet2 jet(double q1, double q2) const {
    Jet2 j(2);
    if (!active()) return j;
    const auto o = offset(q1, q2);
    const double r2 = radius_ * radius_;
    const double t2 = (o[0] * o[0] + o[1] * o[1]) / r2;
    if (t2 >= 1) return j;
    const double w = 1.0 / (1.0 - t2);
    const double psi = std::exp(1.0 - w);
    const double d1 = -psi * w * w;
    const double d2 = psi * (w * w * w * w - 2.0 * w * w * w);
    j.value = peak_ * psi;
    for (int i = 0; i < 2; ++i) {
      j.grad[i] = peak_ * d1 * 2.0 * o[i] / r2;
      for (int l = 0; l < 2; ++l)
        j.hess[i][l] = peak_ * (d2 * 4.0 * o[i] * o[l] / (r2 * r2) + (i == l ? d1 * 2.0 / r2 : 0.0));
    }
    return j;
  }

  // Integral of v along the straight segment qa -> qb traversed in time h,
  // with its gradient with respect to both end points (first two coordinates).
  struct SegmentIntegral {
    double value = 0;
    std::array<double, 2> grad_a{0, 0};
    std::array<double, 2> grad_b{0, 0};
  };

  SegmentIntegral segment(const double* qa, const double* qb, double h,
                          bool with_gradient = true) const {
    SegmentIntegral out;
    if (!active()) return out;
    const double dx = qb[0] - qa[0], dy = qb[1] - qa[1];
    const double len2 = dx * dx + dy * dy;
    for_each_image(qa, qb, radius_, [&](double c1, double c2) {
      const double ox = qa[0] - c1, oy = qa[1] - c2;
      double t0 = 0, t1 = 1;
      if (len2 > 0) {
        const double b = (ox * dx + oy * dy) / len2;
        const double c = (ox * ox + oy * oy - radius_ * radius_) / len2;
        const double disc = b * b - c;
        if (disc <= 0) return;
        const double sq = std::sqrt(disc);
        t0 = std::max(0.0, -b - sq);
        t1 = std::min(1.0, -b + sq);
        if (t1 <= t0) return;
      } else if (ox * ox + oy * oy >= radius_ * radius_) {
        return;
      }
      const double r2 = radius_ * radius_;
      auto local = [&](double t, int which) {
        const double x = ox + t * dx, y = oy + t * dy;
        const double u2 = (x * x + y * y) / r2;
        if (u2 >= 1) return 0.0;
        const double w = 1.0 / (1.0 - u2);
        const double psi = std::exp(1.0 - w);
        if (which == 0) return peak_ * psi;
        const double g = peak_ * (-psi * w * w) * 2.0 / r2;
        switch (which) {
          case 1: return (1 - t) * g * x;
          case 2: return (1 - t) * g * y;
          case 3: return t * g * x;
          default: return t * g * y;
        }
      };
      QuadratureOptions opt;
      // The chord parametrization loses about eps * |dq| / R in argument, so
      // long coarse segments cannot do much better than 1e-10.
      opt.rel_tol = 1e-10;
      const int nint = with_gradient ? 5 : 1;
      std::array<double, 5> res{};
      for (int which = 0; which < nint; ++which) {
        auto f = [&](double t) { return local(t, which); };
        // Absolute floor on the natural scale of each integrand.
        opt.abs_tol = 1e-10 * peak_ * (t1 - t0) * (which == 0 ? 1.0 : 1.0 / radius_);
        res[which] = integrate(f, t0, t1, opt).value;
      }
      out.value += h * res[0];
      out.grad_a[0] += h * res[1];
      out.grad_a[1] += h * res[2];
      out.grad_b[0] += h * res[3];
      out.grad_b[1] += h * res[4];
    });
    return out;
  }

  // Images of q* within distance `pad` of the segment's bounding box.
  template <typename F>
  static void for_each_image(const double* qa, const double* qb, double pad, F&& visit) {
    const double lo1 = std::min(qa[0], qb[0]) - pad, hi1 = std::max(qa[0], qb[0]) + pad;
    const double lo2 = std::min(qa[1], qb[1]) - pad, hi2 = std::max(qa[1], qb[1]) + pad;
    for (auto m1 = static_cast<long>(std::ceil((lo1 - kPi) / kTwoPi));
         m1 <= static_cast<long>(std::floor((hi1 - kPi) / kTwoPi)); ++m1)
      for (auto m2 = static_cast<long>(std::ceil(lo2 / kTwoPi));
           m2 <= static_cast<long>(std::floor(hi2 / kTwoPi)); ++m2)
        visit(kPi + kTwoPi * m1, kTwoPi * m2);
  }

  // Time the segment qa -> qb (duration h) spends within distance rho of q*.
  static double segment_time_within(const double* qa, const double* qb, double h, double rho) {
    const double dx = qb[0] - qa[0], dy = qb[1] - qa[1];
    const double len2 = dx * dx + dy * dy;
    double total = 0;
    for_each_image(qa, qb, rho, [&](double c1, double c2) {
      const double ox = qa[0] - c1, oy = qa[1] - c2;
      if (len2 == 0) {
        if (ox * ox + oy * oy < rho * rho) total += h;
        return;
      }
      const double b = (ox * dx + oy * dy) / len2;
      const double disc = b * b - (ox * ox + oy * oy - rho * rho) / len2;
      if (disc <= 0) return;
      const double sq = std::sqrt(disc);
      const double t0 = std::max(0.0, -b - sq), t1 = std::min(1.0, -b + sq);
      if (t1 > t0) total += h * (t1 - t0);
    });
    return total;
  }

  // Smallest periodic distance from q* to the points of the segment, searched
  // among images within `horizon` of it.
  static double segment_distance(const double* qa, const double* qb, double horizon = kPi) {
    const double dx = qb[0] - qa[0], dy = qb[1] - qa[1];
    const double len2 = dx * dx + dy * dy;
    double best = std::numeric_limits<double>::infinity();
    for_each_image(qa, qb, horizon, [&](double c1, double c2) {
      const double ox = qa[0] - c1, oy = qa[1] - c2;
      const double t = len2 > 0 ? std::clamp(-(ox * dx + oy * dy) / len2, 0.0, 1.0) : 0.0;
      best = std::min(best, std::hypot(ox + t * dx, oy + t * dy));
    });
    return best;
  }

 private:
  double peak_ = 0;
  double radius_ = 1;
};

inline BumpField build_bump(const PerturbationSpec& sp) { return BumpField(sp); }

// L(q, qdot) = sum_i m_i qdot_i^2 / 2 + c_pend (1 - cos q1) + c_bump v(q1, q2).
class Lagrangian {
 public:
  Lagrangian() = default;
  Lagrangian(Vec masses, double c_pend, double c_bump, BumpField bump)
      : masses_(std::move(masses)), c_pend_(c_pend), c_bump_(c_bump), bump_(bump) {
    require(masses_.size() >= 2, "lagrangian: need d >= 2");
    for (double m : masses_) require(m > 0, "lagrangian: masses must be positive");
  }

  std::size_t dim() const { return masses_.size(); }
  const Vec& masses() const { return masses_; }
  double pendulum_coeff() const { return c_pend_; }
  double bump_coeff() const { return c_bump_; }
  const BumpField& bump() const { return bump_; }
  bool has_bump() const { return c_bump_ != 0 && bump_.active(); }

  double kinetic(const Vec& qd) const {
    double k = 0;
    for (std::size_t i = 0; i < dim(); ++i) k += 0.5 * masses_[i] * qd[i] * qd[i];
    return k;
  }
  double pendulum_potential(double q1) const { return c_pend_ * (1.0 - std::cos(q1)); }
  double potential(const Vec& q) const {
    return pendulum_potential(q[0]) + c_bump_ * bump_.value(q[0], q[1]);
  }
  double value(const Vec& q, const Vec& qd) const { return kinetic(qd) + potential(q); }

  // dL/dq; components beyond the second vanish identically.
  Vec grad_q(const Vec& q) const {
    Vec g(dim(), 0.0);
    g[0] = c_pend_ * std::sin(q[0]);
    if (has_bump()) {
      const auto j = bump_.jet(q[0], q[1]);
      g[0] += c_bump_ * j.grad[0];
      g[1] += c_bump_ * j.grad[1];
    }
    return g;
  }
  Vec grad_qd(const Vec& qd) const {
    Vec g(dim());
    for (std::size_t i = 0; i < dim(); ++i) g[i] = masses_[i] * qd[i];
    return g;
  }

 private:
  Vec masses_{1.0, 1.0};
  double c_pend_ = 0;
  double c_bump_ = 0;
  BumpField bump_;
};

inline Lagrangian full_lagrangian(const PerturbationSpec& sp, const BumpField& v) {
  sp.validate();
  return Lagrangian(Vec(static_cast<std::size_t>(sp.d), 1.0), sp.sigma(), 1.0, v);
}

inline Lagrangian full_lagrangian(const PerturbationSpec& sp) {
  return full_lagrangian(sp, build_bump(sp));
}

// Frame-side Lagrangian in q = K x coordinates; metric weights from the row norms.
inline Lagrangian transformed_lagrangian(const PerturbationSpec& sp, const LatticeFrame& f) {
  require(static_cast<std::size_t>(sp.d) == f.dim(), "transformed_lagrangian: dimension mismatch");
  Vec m(f.dim());
  for (std::size_t i = 0; i < f.dim(); ++i) m[i] = 1.0 / static_cast<double>(idot(f.rows[i], f.rows[i]));
  const double k2 = static_cast<double>(idot(f.k(), f.k()));
  const double nk = std::sqrt(k2);
  return Lagrangian(m, std::pow(nk, -sp.a) / k2, 1.0 / k2, build_bump(sp));
}

// Smooth scalar field on the torus with exact partials up to order two.
class PeriodicField {
 public:
  virtual ~PeriodicField() = default;
  virtual std::size_t dim() const = 0;
  virtual Jet2 jet(const Vec& x) const = 0;
  double value(const Vec& x) const { return jet(x).value; }
  // Number of sample points inside the support of a compactly supported
  // component; -1 when the field has no such component.
  virtual long support_hits(const std::vector<Vec>&) const { return -1; }
};

// P(x) = c_cos (1 - cos<k,x>) + c_bump v(<k,x>, <k',x>).
class TransformedPotential : public PeriodicField {
 public:
  TransformedPotential(const PerturbationSpec& sp, const LatticeFrame& f)
      : k_(f.k()), kp_(f.kprime()), bump_(build_bump(sp)) {
    const double k2 = static_cast<double>(idot(k_, k_));
    c_cos_ = std::pow(std::sqrt(k2), -(sp.a + 2.0));
    c_bump_ = 1.0 / k2;
  }
  TransformedPotential(IVec k, IVec kp, double c_cos, double c_bump, BumpField bump)
      : k_(std::move(k)), kp_(std::move(kp)), bump_(bump), c_cos_(c_cos), c_bump_(c_bump) {}

  std::size_t dim() const override { return k_.size(); }
  const BumpField& bump() const { return bump_; }

  std::array<double, 2> q_of(const Vec& x) const {
    return {mixed_dot(k_, x), mixed_dot(kp_, x)};
  }

  Jet2 jet(const Vec& x) const override {
    const std::size_t d = dim();
    const auto q = q_of(x);
    // Jet in (q1, q2), then the chain rule through the integer rows.
    Jet2 g = bump_.jet(q[0], q[1]);
    g.value *= c_bump_;
    for (int i = 0; i < 2; ++i) {
      g.grad[i] *= c_bump_;
      for (int l = 0; l < 2; ++l) g.hess[i][l] *= c_bump_;
    }
    g.value += c_cos_ * (1.0 - std::cos(q[0]));
    g.grad[0] += c_cos_ * std::sin(q[0]);
    g.hess[0][0] += c_cos_ * std::cos(q[0]);

    const IVec* rows[2] = {&k_, &kp_};
    Jet2 out(d);
    out.value = g.value;
    for (std::size_t j = 0; j < d; ++j) {
      for (int i = 0; i < 2; ++i) out.grad[j] += static_cast<double>((*rows[i])[j]) * g.grad[i];
      for (std::size_t m = 0; m < d; ++m)
        for (int i = 0; i < 2; ++i)
          for (int l = 0; l < 2; ++l)
            out.hess[j][m] += static_cast<double>((*rows[i])[j]) *
                              static_cast<double>((*rows[l])[m]) * g.hess[i][l];
    }
    return out;
  }

  long support_hits(const std::vector<Vec>& pts) const override {
    if (!bump_.active()) return -1;
    long hits = 0;
    for (const auto& x : pts) {
      const auto q = q_of(x);
      if (bump_.periodic_distance(q[0], q[1]) < bump_.radius()) ++hits;
    }
    return hits;
  }

 private:
  IVec k_, kp_;
  BumpField bump_;
  double c_cos_ = 0, c_bump_ = 0;
};

inline TransformedPotential transformed_potential(const PerturbationSpec& sp,
                                                  const LatticeFrame& f) {
  return TransformedPotential(sp, f);
}

// 1 - cos<k,x>, optionally with the bump in (q1, q2) = (<k,x>, <k',x>).
class CosineField : public PeriodicField {
 public:
  explicit CosineField(IVec k) : k_(std::move(k)) {}
  std::size_t dim() const override { return k_.size(); }
  Jet2 jet(const Vec& x) const override {
    const double q = mixed_dot(k_, x);
    Jet2 j(dim());
    j.value = 1.0 - std::cos(q);
    for (std::size_t a = 0; a < dim(); ++a) {
      j.grad[a] = k_[a] * std::sin(q);
      for (std::size_t b = 0; b < dim(); ++b)
        j.hess[a][b] = static_cast<double>(k_[a] * k_[b]) * std::cos(q);
    }
    return j;
  }

 private:
  IVec k_;
};

// The bump itself as a field on T^2.
class BumpAsField : public PeriodicField {
 public:
  explicit BumpAsField(BumpField b) : b_(b) {}
  std::size_t dim() const override { return 2; }
  Jet2 jet(const Vec& x) const override { return b_.jet(x[0], x[1]); }
  long support_hits(const std::vector<Vec>& pts) const override {
    if (!b_.active()) return -1;
    long hits = 0;
    for (const auto& x : pts)
      if (b_.periodic_distance(x[0], x[1]) < b_.radius()) ++hits;
    return hits;
  }

 private:
  BumpField b_;
};

struct SampleGrid {
  std::vector<Vec> points;
  double fd_step = 1e-4;  // central-difference step for orders 3 and 4
};

// Uniform grid on [0, 2 pi)^d with `per_axis` points per axis.
inline SampleGrid torus_grid(std::size_t d, int per_axis) {
  require(per_axis >= 2, "torus_grid: need >= 2 points per axis");
  SampleGrid g;
  const double hstep = kTwoPi / per_axis;
  std::vector<int> idx(d, 0);
  while (true) {
    Vec p(d);
    for (std::size_t i = 0; i < d; ++i) p[i] = idx[i] * hstep;
    g.points.push_back(p);
    std::size_t i = 0;
    while (i < d && idx[i] == per_axis - 1) idx[i++] = 0;
    if (i == d) break;
    ++idx[i];
  }
  g.fd_step = hstep / 16.0;
  return g;
}

// Square patch of side 2*half_width around `center` in (q1, q2).
inline void add_patch(SampleGrid& g, std::array<double, 2> center, double half_width, int per_axis) {
  for (int i = 0; i < per_axis; ++i)
    for (int j = 0; j < per_axis; ++j)
      g.points.push_back({center[0] + half_width * (2.0 * i / (per_axis - 1) - 1.0),
                          center[1] + half_width * (2.0 * j / (per_axis - 1) - 1.0)});
  g.fd_step = std::min(g.fd_step, 2.0 * half_width / (per_axis - 1) / 16.0);
}

// Samples for a frame-side field: a uniform (q1, q2) torus grid plus a patch
// resolving supp v around q*, mapped back through x = K^T diag(|row|^-2) q.
// Every x-torus class maps onto q-space, so sampling q covers the x-torus.
inline SampleGrid frame_grid(const LatticeFrame& f, double bump_radius, int per_axis,
                             int patch_per_axis) {
  SampleGrid q = torus_grid(2, per_axis);
  if (bump_radius > 0) add_patch(q, BumpField::center(), 1.25 * bump_radius, patch_per_axis);
  const std::size_t d = f.dim();
  SampleGrid out;
  for (const auto& qq : q.points) {
    Vec full(d, 0.0);
    full[0] = qq[0];
    full[1] = qq[1];
    Vec x(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      const double w = full[i] / static_cast<double>(idot(f.rows[i], f.rows[i]));
      for (std::size_t j = 0; j < d; ++j) x[j] += static_cast<double>(f.rows[i][j]) * w;
    }
    out.points.push_back(x);
  }
  // A step of fd_step in x moves q by at most max|row| * fd_step.
  double rmax = 0;
  for (const auto& r : f.rows)
    for (auto v : r) rmax = std::max(rmax, std::abs(static_cast<double>(v)));
  out.fd_step = q.fd_step / std::max(1.0, rmax);
  return out;
}

namespace detail {

// Largest |partial| of total order exactly `order` (<= 4) at x.
inline double max_partial_of_order(const PeriodicField& f, const Vec& x, int order, double h) {
  const std::size_t d = f.dim();
  if (order == 0) return std::abs(f.value(x));
  if (order <= 2) {
    const auto j = f.jet(x);
    double m = 0;
    if (order == 1)
      for (double g : j.grad) m = std::max(m, std::abs(g));
    else
      for (const auto& row : j.hess)
        for (double v : row) m = std::max(m, std::abs(v));
    return m;
  }
  double m = 0;
  auto shifted = [&](std::size_t a, double da, std::size_t b, double db) {
    Vec y = x;
    y[a] += da;
    y[b] += db;
    return f.jet(y).hess;
  };
  if (order == 3) {
    for (std::size_t c = 0; c < d; ++c) {
      const auto hp = shifted(c, h, c, 0), hm = shifted(c, -h, c, 0);
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) m = std::max(m, std::abs((hp[a][b] - hm[a][b]) / (2 * h)));
    }
    return m;
  }
  require(order == 4, "cr_norm: derivative order capped at 4");
  const auto h0 = f.jet(x).hess;
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t e = c; e < d; ++e) {
      std::vector<Vec> v(d, Vec(d));
      if (c == e) {
        const auto hp = shifted(c, h, c, 0), hm = shifted(c, -h, c, 0);
        for (std::size_t a = 0; a < d; ++a)
          for (std::size_t b = 0; b < d; ++b) v[a][b] = (hp[a][b] - 2 * h0[a][b] + hm[a][b]) / (h * h);
      } else {
        const auto pp = shifted(c, h, e, h), pm = shifted(c, h, e, -h);
        const auto mp = shifted(c, -h, e, h), mm = shifted(c, -h, e, -h);
        for (std::size_t a = 0; a < d; ++a)
          for (std::size_t b = 0; b < d; ++b)
            v[a][b] = (pp[a][b] - pm[a][b] - mp[a][b] + mm[a][b]) / (4 * h * h);
      }
      for (const auto& row : v)
        for (double val : row) m = std::max(m, std::abs(val));
    }
  }
  return m;
}

}  // namespace detail

// Sampled C^r norm: max over the grid of all partials of total order <= r.
inline double cr_norm(const PeriodicField& f, int r, const SampleGrid& grid) {
  require(r >= 0 && r <= 4, "cr_norm: r must be in [0, 4]");
  require(!grid.points.empty(), "cr_norm: empty grid");
  if (f.support_hits(grid.points) == 0)
    throw PreconditionError("cr_norm: grid too coarse, no sample inside the bump support");
  double m = 0;
  for (const auto& x : grid.points)
    for (int order = 0; order <= r; ++order)
      m = std::max(m, detail::max_partial_of_order(f, x, order, grid.fd_step));
  return m;
}

struct NormRow {
  IVec k;
  double k_norm = 0;
  int r = 0;
  double norm = 0;
  double refined_change = 0;  // relative change when the grid is doubled
};

struct NormDecayReport {
  std::vector<NormRow> rows;
  std::vector<int> r_list;
  Vec slopes;          // log-log slope per r
  Vec expected_slopes; // r - a - 2
  Vec r_squared;
  double fit_min_norm = 0;
};

struct NormGridConfig {
  int per_axis = 128;
  int patch_per_axis = 48;
  double fit_min_norm = 5.0;  // entries below this |k| are reported but not fitted
  bool convergence_check = true;
};

// Measured ||P||_{C^r} along an approximant sequence and its log-log slope in |k|.
inline NormDecayReport norm_decay_report(const RotationVector& w,
                                         const std::vector<Approximant>& seq, double a,
                                         const std::vector<int>& r_list, double s,
                                         double s_prime, const NormGridConfig& cfg = {}) {
  require(!r_list.empty(), "norm_decay_report: empty r list");
  NormDecayReport rep;
  rep.r_list = r_list;
  rep.fit_min_norm = cfg.fit_min_norm;
  std::size_t fit_count = 0;
  for (const auto& ap : seq)
    if (ap.norm >= cfg.fit_min_norm) ++fit_count;
  if (fit_count < 3)
    throw PreconditionError("norm_decay_report: need >= 3 approximants with |k| >= " +
                            std::to_string(cfg.fit_min_norm));
  for (int r : r_list) {
    Vec lx, ly;
    for (const auto& ap : seq) {
      const auto frame = build_frame(ap.k, w);
      const auto sp = spec_for_frame(frame, a, s, s_prime);
      const TransformedPotential P(sp, frame);
      const auto grid = frame_grid(frame, sp.R(), cfg.per_axis, cfg.patch_per_axis);
      NormRow row{ap.k, ap.norm, r, cr_norm(P, r, grid), 0.0};
      if (cfg.convergence_check) {
        const auto fine = frame_grid(frame, sp.R(), 2 * cfg.per_axis, 2 * cfg.patch_per_axis);
        const double nf = cr_norm(P, r, fine);
        row.refined_change = std::abs(nf - row.norm) / nf;
      }
      rep.rows.push_back(row);
      if (ap.norm >= cfg.fit_min_norm) {
        lx.push_back(std::log(ap.norm));
        ly.push_back(std::log(row.norm));
      }
    }
    const auto fit = fit_line(lx, ly);
    rep.slopes.push_back(fit.slope);
    rep.r_squared.push_back(fit.r_squared);
    rep.expected_slopes.push_back(r - a - 2.0);
  }
  return rep;
}

}  // namespace lagtorus
