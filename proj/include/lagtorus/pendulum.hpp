#pragma once

// The pendulum A(q, qdot) = qdot^2/2 + sigma (1 - cos q) on rotational orbits.
//
// An energy level e > 0 of h = p^2/2 - sigma (1 - cos q) fixes the half-turn
// time and action. With u = q/2 both integrals live on [0, pi/2]:
//
//   dt(e) = 2 int du / sqrt(2e + 4 sigma sin^2 u)
//   S(e)  = 2 int sqrt(2e + 4 sigma sin^2 u) du
//
// and the half-turn action is S(e) - e * dt. Near the separatrix the
// integrands concentrate in a layer of width sqrt(e / sigma) around u = 0,
// which the quadrature receives as geometric breakpoints.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "lagtorus/common.hpp"
#include "lagtorus/quadrature.hpp"

namespace lagtorus {

struct PendulumParams {
  double sigma = 0;

  PendulumParams() = default;
  explicit PendulumParams(double s) : sigma(s) {
    require(std::isfinite(s) && s >= 0, "pendulum: sigma must be finite and >= 0");
  }
};

enum class Leg { first, second };

namespace detail {

// Breakpoints on [0, pi/2] clustered at the separatrix layer.
inline std::vector<double> layer_breaks(double e, double sigma) {
  std::vector<double> b{0.0};
  if (sigma > 0) {
    double s = std::sqrt(e / (2.0 * sigma));
    while (s < kPi / 2 && s > 0) {
      if (s > b.back()) b.push_back(s);
      s *= 4.0;
    }
  }
  b.push_back(kPi / 2);
  return b;
}

inline void check_energy(double e) {
  if (!(e > 0) || !std::isfinite(e))
    throw PreconditionError("pendulum: energy must be > 0 (separatrix excluded), got " +
                            std::to_string(e));
}

}  // namespace detail

inline double half_turn_time(double e, const PendulumParams& p, Leg leg = Leg::first) {
  detail::check_energy(e);
  auto f = [&](double u) {
    const double s = std::sin(u);
    return 2.0 / std::sqrt(2.0 * e + 4.0 * p.sigma * s * s);
  };
  // The second leg (u in [pi/2, pi]) is integrated in w = pi - u, which keeps
  // the layer at w = 0 free of the rounding in pi - u.
  (void)leg;
  return integrate(f, detail::layer_breaks(e, p.sigma)).value;
}

// int sqrt(2(e + V(q))) dq over the half turn.
inline double half_turn_momentum_integral(double e, const PendulumParams& p,
                                          Leg leg = Leg::first) {
  detail::check_energy(e);
  auto f = [&](double u) {
    const double s = std::sin(u);
    return 2.0 * std::sqrt(2.0 * e + 4.0 * p.sigma * s * s);
  };
  (void)leg;
  return integrate(f, detail::layer_breaks(e, p.sigma)).value;
}

inline double half_turn_action(double e, const PendulumParams& p, Leg leg = Leg::first) {
  return half_turn_momentum_integral(e, p, leg) - e * half_turn_time(e, p, leg);
}

// Inverse of the strictly decreasing map e -> half_turn_time(e). Root search
// in log e, bracketed, Illinois false position with bisection fallback.
inline double energy_from_time(double dt, const PendulumParams& p) {
  if (!(dt > 0) || !std::isfinite(dt))
    throw PreconditionError("energy_from_time: dt must be > 0");
  const double s = p.sigma;
  const double free_e = kPi * kPi / (2.0 * dt * dt);
  double lo = s > 0 ? std::log(s) - 4.0 * std::sqrt(s) * dt : std::log(free_e / 4.0);
  double hi = std::log(std::max(8.0 * s, 4.0 * kPi * kPi / (dt * dt)));
  auto residual = [&](double y) { return half_turn_time(std::exp(y), p) - dt; };

  double flo = residual(lo), fhi = residual(hi);
  for (int i = 0; i < 60 && flo < 0; ++i) flo = residual(lo -= 8.0);
  for (int i = 0; i < 60 && fhi > 0; ++i) fhi = residual(hi += 2.0);
  if (!(flo >= 0 && fhi <= 0))
    throw NonConvergenceError("energy_from_time: bracketing failed on ln e in [" +
                              std::to_string(lo) + ", " + std::to_string(hi) + "]");
  if (flo == 0) return std::exp(lo);
  if (fhi == 0) return std::exp(hi);

  int side = 0;
  for (int it = 0; it < 200; ++it) {
    double y = (lo * fhi - hi * flo) / (fhi - flo);
    if (it % 8 == 7 || !(y > lo && y < hi)) y = 0.5 * (lo + hi);
    const double fy = residual(y);
    if (fy == 0 || std::abs(fy) <= 1e-15 * dt) return std::exp(y);
    if (fy > 0) {
      lo = y;
      flo = fy;
      if (side == 1) fhi *= 0.5;
      side = 1;
    } else {
      hi = y;
      fhi = fy;
      if (side == -1) flo *= 0.5;
      side = -1;
    }
    if (hi - lo <= 4e-16 * std::max(1.0, std::abs(lo))) return std::exp(0.5 * (lo + hi));
  }
  return std::exp(0.5 * (lo + hi));
}

// Action of a half turn completed in time tau: S(e(tau)) - e(tau) tau.
inline double leg_action(double tau, const PendulumParams& p) {
  const double e = energy_from_time(tau, p);
  return half_turn_momentum_integral(e, p) - e * tau;
}

// L(t1): q1 = 0 at t0, pi at t1, 2 pi at t2.
inline double two_leg_action(double t1, double t0, double t2, const PendulumParams& p) {
  if (!(t0 < t1 && t1 < t2))
    throw PreconditionError("two_leg_action: need t0 < t1 < t2");
  return leg_action(t1 - t0, p) + leg_action(t2 - t1, p);
}

// Closed form of dL/dt1.
inline double two_leg_action_slope(double t1, double t0, double t2, const PendulumParams& p) {
  if (!(t0 < t1 && t1 < t2))
    throw PreconditionError("two_leg_action_slope: need t0 < t1 < t2");
  return energy_from_time(t2 - t1, p) - energy_from_time(t1 - t0, p);
}

struct ShiftBoundReport {
  double action_difference = 0;  // |L(tbar) - L(ttilde)|
  double bound = 0;              // |tbar - ttilde| * max leg energy
  double ratio = 0;              // difference / bound (0 when both vanish)
  bool holds = true;             // ratio <= 1 + 1e-6
};

inline ShiftBoundReport action_shift_bound(double tbar, double ttilde, double t0, double t2,
                                           const PendulumParams& p) {
  if (!(t0 < tbar && tbar < t2 && t0 < ttilde && ttilde < t2))
    throw PreconditionError("action_shift_bound: interior times must lie in (t0, t2)");
  ShiftBoundReport r;
  if (tbar == ttilde) return r;
  const double lbar = two_leg_action(tbar, t0, t2, p);
  r.action_difference = std::abs(lbar - two_leg_action(ttilde, t0, t2, p));
  const double emax = std::max({energy_from_time(tbar - t0, p), energy_from_time(t2 - tbar, p),
                                energy_from_time(ttilde - t0, p),
                                energy_from_time(t2 - ttilde, p)});
  r.bound = std::abs(tbar - ttilde) * emax;
  if (r.bound < 1e-9 * std::abs(lbar)) {
    // The direct difference is lost to rounding; integrate the slope instead.
    QuadratureOptions opt;
    opt.rel_tol = 1e-10;
    opt.max_intervals = 200;
    auto slope = [&](double t) { return two_leg_action_slope(t, t0, t2, p); };
    r.action_difference = std::abs(integrate(slope, std::min(tbar, ttilde), std::max(tbar, ttilde), opt).value);
  }
  r.ratio = r.bound > 0 ? r.action_difference / r.bound : 0.0;
  r.holds = r.ratio <= 1.0 + 1e-6;
  return r;
}

struct SeparatrixFit {
  double slope = 0;
  double intercept = 0;
  double r_squared = 0;
  double fitted_c = 0;  // slope = -c sqrt(sigma)
  Vec dt;
  Vec log_e;
};

// Regression of ln e(dt) against dt in the near-separatrix regime e <= sigma/100.
inline SeparatrixFit separatrix_law_fit(const PendulumParams& p, const Vec& dt_grid) {
  if (!(p.sigma > 0))
    throw PreconditionError("separatrix_law_fit: sigma = 0 has no separatrix");
  require(dt_grid.size() >= 3, "separatrix_law_fit: need >= 3 grid points");
  SeparatrixFit out;
  for (double dt : dt_grid) {
    const double e = energy_from_time(dt, p);
    if (e > p.sigma / 100.0)
      throw PreconditionError("separatrix_law_fit: dt = " + std::to_string(dt) +
                              " is outside the near-separatrix regime");
    out.dt.push_back(dt);
    out.log_e.push_back(std::log(e));
  }
  const auto f = fit_line(out.dt, out.log_e);
  out.slope = f.slope;
  out.intercept = f.intercept;
  out.r_squared = f.r_squared;
  out.fitted_c = -f.slope / std::sqrt(p.sigma);
  return out;
}

struct IdentityCheckRow {
  double sigma = 0, t1 = 0;
  double fd_slope = 0, closed_slope = 0, slope_rel_err = 0;
  double roundtrip_rel_err = 0;
};

struct IdentitySuiteReport {
  std::vector<IdentityCheckRow> rows;
  double worst_slope_err = 0;
  double worst_roundtrip_err = 0;
  bool slope_ok = false, roundtrip_ok = false, unimodal_ok = false;
  std::vector<double> argmin_offsets;  // |argmin - T/2| in grid cells, per sigma
  bool passed() const { return slope_ok && roundtrip_ok && unimodal_ok; }
};

// Central differences of L(t1) against the closed slope, e -> dt -> e round
// trips, and unimodality of L on [0, T] sampled at `cells` + 1 points.
inline IdentitySuiteReport pendulum_identity_suite(const Vec& sigmas, const Vec& t1_fractions,
                                                   double T, int cells = 200,
                                                   double slope_tol = 1e-6,
                                                   double roundtrip_tol = 1e-8) {
  require(T > 0 && cells >= 4 && cells % 2 == 0, "pendulum_identity_suite: bad window");
  IdentitySuiteReport rep;
  for (double sg : sigmas) {
    const PendulumParams p(sg);
    for (double f : t1_fractions) {
      require(f > 0 && f < 1, "pendulum_identity_suite: t1 fractions must lie in (0, 1)");
      IdentityCheckRow row;
      row.sigma = sg;
      row.t1 = f * T;
      const double h = 1e-4 * std::min(row.t1, T - row.t1);
      row.fd_slope = (two_leg_action(row.t1 + h, 0, T, p) - two_leg_action(row.t1 - h, 0, T, p)) / (2 * h);
      row.closed_slope = two_leg_action_slope(row.t1, 0, T, p);
      row.slope_rel_err = std::abs(row.fd_slope - row.closed_slope) / std::abs(row.closed_slope);
      const double e = energy_from_time(row.t1, p);
      const double back = energy_from_time(half_turn_time(e, p), p);
      row.roundtrip_rel_err = std::abs(back - e) / e;
      rep.worst_slope_err = std::max(rep.worst_slope_err, row.slope_rel_err);
      rep.worst_roundtrip_err = std::max(rep.worst_roundtrip_err, row.roundtrip_rel_err);
      rep.rows.push_back(row);
    }
    Vec L(cells - 1);
    for (int j = 1; j < cells; ++j) L[j - 1] = two_leg_action(T * j / cells, 0, T, p);
    const auto it = std::min_element(L.begin(), L.end());
    const auto jmin = static_cast<int>(it - L.begin());
    bool mono = true;
    for (int j = 1; j <= jmin; ++j) mono = mono && L[j] <= L[j - 1];
    for (std::size_t j = jmin + 1; j < L.size(); ++j) mono = mono && L[j] >= L[j - 1];
    const double off = std::abs((jmin + 1) - cells / 2.0);
    rep.argmin_offsets.push_back(off);
    rep.unimodal_ok = (rep.argmin_offsets.size() == 1 || rep.unimodal_ok) && mono && off <= 1.0;
  }
  rep.slope_ok = !rep.rows.empty() && rep.worst_slope_err <= slope_tol;
  rep.roundtrip_ok = !rep.rows.empty() && rep.worst_roundtrip_err <= roundtrip_tol;
  return rep;
}

}  // namespace lagtorus
