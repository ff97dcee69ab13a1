#pragma once

// Numerical version of the no-torus argument on one q1 turn.
//
// Window: t in [0, T], T = 2 pi / |omega_1|, from (0, -omega_Q T/2) to
// (2 pi, omega_Q T/2). The path forced through q* = (pi, 0) pays the bump
// integral; the competitors forced through (pi, +-pi) cross q1 = pi a time of
// order pi/|omega_2| later or earlier and pay only a pendulum time shift,
// which is exponentially small in sqrt(sigma)/|omega_1|.
//
// All actions below are excesses over the kinetic action of the common chord,
// so differences between competitors carry no cancellation.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "lagtorus/common.hpp"
#include "lagtorus/diophantine.hpp"
#include "lagtorus/lattice_frame.hpp"
#include "lagtorus/minimizer.hpp"
#include "lagtorus/parallel.hpp"
#include "lagtorus/pendulum.hpp"
#include "lagtorus/perturbation.hpp"

namespace lagtorus {

inline constexpr double kOmega2BandLo = 0.25;
inline constexpr double kOmega2BandHi = 4.0;

// Working rotation vector at scale n shaped like the golden-mean frames:
// |k| |<k,omega>| -> sqrt((1 + phi^2)/5) and <k',omega>/|k| -> sqrt(1 + phi^2).
inline RotationVector golden_working_rotation(double n) {
  require(n >= 1, "golden_working_rotation: n must be >= 1");
  const double g2 = 1.0 + kGolden * kGolden;
  return RotationVector(Vec{std::sqrt(g2 / 5.0) / n, std::sqrt(g2) * n});
}

struct LabOptions {
  double epsilon = 0.1;
  double h_max = 0.05;           // coarse time step
  double fine_fraction = 0.05;   // finest step = fine_fraction * R / |omega_2|
  double growth = 1.15;
  MinimizerOptions solver{};
  unsigned threads = 1;
};

// Regime of the no-torus argument: |omega_1| < n^(-a/2 - eps) and |omega_2|/n in the band.
inline void check_regime(const PerturbationSpec& sp, const RotationVector& w, double epsilon) {
  sp.validate();
  require(w.dim() == static_cast<std::size_t>(sp.d), "lab: rotation vector dimension differs from d");
  const double w1 = std::abs(w[0]);
  const double limit = std::pow(sp.n, -sp.a / 2.0 - epsilon);
  if (!(w1 < limit))
    throw PreconditionError("lab: |omega_1| = " + std::to_string(w1) + " violates |omega_1| < n^(-a/2-eps) = " +
                            std::to_string(limit));
  const double ratio = std::abs(w[1]) / sp.n;
  if (!(ratio >= kOmega2BandLo && ratio <= kOmega2BandHi))
    throw PreconditionError("lab: |omega_2|/n = " + std::to_string(ratio) + " outside [1/4, 4]");
  if (std::abs(std::abs(w[0]) - sp.omega1_abs) > 1e-12 * sp.omega1_abs)
    throw PreconditionError("lab: perturbation |omega_1| does not match the rotation vector");
}

struct LabWindow {
  double t0 = 0, T = 0;
  Vec qa, qb, q_star, q_plus, q_minus;
};

inline LabWindow lab_window(const RotationVector& w) {
  LabWindow win;
  win.T = kTwoPi / std::abs(w[0]);
  const std::size_t d = w.dim();
  win.qa.assign(d, 0.0);
  win.qb.assign(d, 0.0);
  win.qb[0] = kTwoPi;
  for (std::size_t j = 1; j < d; ++j) {
    win.qa[j] = -0.5 * std::abs(w[j]) * win.T;
    win.qb[j] = 0.5 * std::abs(w[j]) * win.T;
  }
  // The chord meets q1 = pi at T/2 with Q = 0, so this lift of q* lies on it.
  win.q_star.assign(d, 0.0);
  win.q_star[0] = kPi;
  // Detour points: where the chord's Q part sits at T/2 +- pi/|omega_2|, kept at
  // q1 = pi. In d = 2 these are (pi, +-pi).
  win.q_plus = win.q_star;
  win.q_minus = win.q_star;
  const double shift = kPi / std::abs(w[1]);
  for (std::size_t j = 1; j < d; ++j) {
    win.q_plus[j] = j == 1 ? kPi : std::abs(w[j]) * shift;
    win.q_minus[j] = -win.q_plus[j];
  }
  return win;
}

inline ThroughOptions lab_through_options(const PerturbationSpec& sp, const RotationVector& w,
                                          const LabWindow& win, const LabOptions& opt) {
  ThroughOptions t;
  t.fine_step = opt.fine_fraction * sp.R() / std::abs(w[1]);
  t.growth = opt.growth;
  // Wide enough to contain the detour crossings at T/2 +- pi/|omega_2|.
  const double wdt = std::min(0.45, 8.0 * kPi / (std::abs(w[1]) * win.T) + 0.02);
  t.split_lo = 0.5 - wdt;
  t.split_hi = 0.5 + wdt;
  return t;
}

inline std::size_t lab_cells(const LabWindow& win, const LabOptions& opt) {
  return std::max<std::size_t>(16, static_cast<std::size_t>(std::ceil(win.T / opt.h_max)));
}

struct DetourPair {
  ThroughPointResult plus, minus;  // through q_plus and q_minus of the window
};

inline DetourPair detour_candidates(const PerturbationSpec& sp, const RotationVector& w,
                                    const LabOptions& opt = {}) {
  const auto win = lab_window(w);
  if (!(win.qa[0] == 0.0 && win.qb[0] == kTwoPi))
    throw PreconditionError("detour_candidates: end points must straddle one q1 turn");
  const auto L = full_lagrangian(sp);
  const auto topt = lab_through_options(sp, w, win, opt);
  const auto N = lab_cells(win, opt);
  DetourPair out;
  parallel_for(2, opt.threads, [&](std::size_t i) {
    const Vec& mid = i == 0 ? win.q_plus : win.q_minus;
    auto r = minimize_through_point(L, win.qa, mid, win.qb, win.T, 0.5, N, opt.solver, topt);
    (i == 0 ? out.plus : out.minus) = std::move(r);
  });
  return out;
}

struct BumpCost {
  double cost = 0;         // time integral of v along the path
  double lower_bound = 0;  // time within R/2 of q* times peak e^(-1/3)
  double dwell_time = 0;   // time inside supp v
};

inline BumpCost bump_crossing_cost(const PerturbationSpec& sp, const DiscretePath& path) {
  path.validate();
  const auto v = build_bump(sp);
  double closest = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < path.size(); ++i)
    closest = std::min(closest, BumpField::segment_distance(path.nodes[i].data(),
                                                            path.nodes[i + 1].data(), sp.R()));
  if (!(closest <= 1e-9 * std::max(1.0, sp.R())))
    throw PreconditionError("bump_crossing_cost: path misses q* (closest approach " +
                            std::to_string(closest) + ")");
  BumpCost c;
  long double cost = 0, inner = 0, dwell = 0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const double* qa = path.nodes[i].data();
    const double* qb = path.nodes[i + 1].data();
    cost += v.segment(qa, qb, path.h(i), false).value;
    inner += BumpField::segment_time_within(qa, qb, path.h(i), 0.5 * sp.R());
    dwell += BumpField::segment_time_within(qa, qb, path.h(i), sp.R());
  }
  c.cost = static_cast<double>(cost);
  c.dwell_time = static_cast<double>(dwell);
  c.lower_bound = static_cast<double>(inner) * v.peak() * std::exp(-1.0 / 3.0);
  return c;
}

struct Avoidance {
  bool avoids = false;
  double margin = 0;  // smallest periodic distance to supp v (negative inside)
};

inline Avoidance avoidance_check(const PerturbationSpec& sp, const DiscretePath& path) {
  path.validate();
  const double R = sp.R();
  if (!(R < kPi / 2)) return {false, -R};
  double closest = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < path.size(); ++i)
    closest = std::min(closest, BumpField::segment_distance(path.nodes[i].data(),
                                                            path.nodes[i + 1].data()));
  return {closest > R, closest - R};
}

// Pendulum action bound for moving the q1 = pi crossing from tbar to ttilde
// inside the window [0, T].
inline double time_shift_budget(const PerturbationSpec& sp, double tbar, double ttilde,
                                double omega1, double T, double epsilon = 0.1) {
  sp.validate();
  const double w1 = std::abs(omega1);
  const double limit = std::pow(sp.n, -sp.a / 2.0 - epsilon);
  if (!(w1 < limit))
    throw PreconditionError("time_shift_budget: |omega_1| = " + std::to_string(w1) +
                            " violates |omega_1| < n^(-a/2-eps) = " + std::to_string(limit));
  require(T > 0, "time_shift_budget: need T > 0");
  if (tbar == ttilde) return 0.0;
  return action_shift_bound(tbar, ttilde, 0.0, T, PendulumParams(sp.sigma())).bound;
}

enum class Verdict { gap, no_gap, inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::gap: return "true";
    case Verdict::no_gap: return "false";
    default: return "inconclusive";
  }
}

struct GapCertificate {
  PerturbationSpec spec;
  RotationVector omega_work;
  double T = 0;
  double window_ratio = 0;  // T |omega_1| / (2 pi), checked against [1/4, 4]
  double A_through = 0;
  double A_detour = 0;
  double A_detour_plus = 0, A_detour_minus = 0;
  double A_direct = 0;
  double A_unconstrained = 0;
  double gap = 0;  // A_through - A_detour
  BumpCost bump;
  double shift_bound = 0;
  double shift_action = 0;  // measured pendulum cost of the shift
  double t_through = 0, t_detour = 0;
  Avoidance avoidance;
  double lambda = 0;  // ln(bump cost) / ln |omega_1|
  double el_residual = 0;
  bool converged = false;
  bool endpoints_match = false;
  Verdict verdict = Verdict::inconclusive;
  std::string diagnostic;
  ThroughPointResult through;
  DetourPair detours;
};

inline GapCertificate certify_gap(const PerturbationSpec& sp, const RotationVector& w,
                                  const LabOptions& opt = {}) {
  check_regime(sp, w, opt.epsilon);
  GapCertificate c;
  c.spec = sp;
  c.omega_work = w;
  const auto win = lab_window(w);
  c.T = win.T;
  c.window_ratio = win.T * std::abs(w[0]) / kTwoPi;
  const auto L = full_lagrangian(sp);
  const auto topt = lab_through_options(sp, w, win, opt);
  const auto N = lab_cells(win, opt);

  MinimizeResult direct;
  parallel_for(4, opt.threads, [&](std::size_t i) {
    switch (i) {
      case 0:
        c.through = minimize_through_point(L, win.qa, win.q_star, win.qb, win.T, 0.5, N, opt.solver, topt);
        break;
      case 1:
        c.detours.plus = minimize_through_point(L, win.qa, win.q_plus, win.qb, win.T, 0.5, N, opt.solver, topt);
        break;
      case 2:
        c.detours.minus = minimize_through_point(L, win.qa, win.q_minus, win.qb, win.T, 0.5, N, opt.solver, topt);
        break;
      default:
        direct = minimize_fixed_endpoints(L, win.qa, win.qb, win.T, N, opt.solver);
    }
  });
  c.converged = c.through.converged && c.detours.plus.converged && c.detours.minus.converged &&
                direct.converged;
  c.A_through = c.through.report.excess;
  c.A_detour_plus = c.detours.plus.report.excess;
  c.A_detour_minus = c.detours.minus.report.excess;
  const bool plus_best = c.A_detour_plus <= c.A_detour_minus;
  const auto& best = plus_best ? c.detours.plus : c.detours.minus;
  c.A_detour = best.report.excess;
  c.A_direct = direct.report.excess;
  c.A_unconstrained = std::min(c.A_direct, c.A_detour);
  c.gap = c.A_through - c.A_detour;
  c.t_through = c.through.t_mid;
  c.t_detour = best.t_mid;
  c.el_residual = std::max({c.through.report.el_residual, c.detours.plus.report.el_residual,
                            c.detours.minus.report.el_residual, direct.report.el_residual});

  c.endpoints_match = true;
  for (const auto* p : {&c.detours.plus.path, &c.detours.minus.path, &direct.path}) {
    c.endpoints_match = c.endpoints_match && p->nodes.front() == c.through.path.nodes.front() &&
                        p->nodes.back() == c.through.path.nodes.back() &&
                        p->winding() == c.through.path.winding() &&
                        p->t_start() == c.through.path.t_start() && p->t_end() == c.through.path.t_end();
  }

  c.bump = bump_crossing_cost(sp, c.through.path);
  c.avoidance = avoidance_check(sp, best.path);
  const PendulumParams pp(sp.sigma());
  if (c.t_through != c.t_detour) {
    const auto sb = action_shift_bound(c.t_through, c.t_detour, 0.0, win.T, pp);
    c.shift_bound = sb.bound;
    c.shift_action = sb.action_difference;
  }
  if (c.bump.cost > 0) c.lambda = std::log(c.bump.cost) / std::log(std::abs(w[0]));

  const double threshold = c.bump.lower_bound - c.shift_bound;
  const bool window_ok = c.window_ratio >= 0.25 && c.window_ratio <= 4.0;
  if (!c.converged) {
    c.verdict = Verdict::inconclusive;
    c.diagnostic = "sub-problem not converged";
  } else if (!c.endpoints_match || !window_ok) {
    c.verdict = Verdict::inconclusive;
    c.diagnostic = "competition data inconsistent";
  } else if (threshold > 0 && c.gap >= threshold && c.avoidance.avoids) {
    c.verdict = Verdict::gap;
  } else {
    c.verdict = Verdict::no_gap;
  }
  return c;
}

// Frame-side entry: n = |k|, working rotation = K omega with signs folded.
inline RotationVector working_rotation_from_frame(const LatticeFrame& f, const RotationVector& w) {
  const auto kw = push_rotation(f, w);
  Vec c(kw.coords);
  for (auto& x : c) x = std::abs(x);
  return RotationVector(c);
}

inline GapCertificate certify_gap(const PerturbationSpec& sp, const LatticeFrame& f,
                                  const RotationVector& w, const LabOptions& opt = {}) {
  return certify_gap(sp, working_rotation_from_frame(f, w), opt);
}

struct GapScanRow {
  double phase1 = 0, phase2 = 0;
  double excess = 0;  // constrained action minus the unconstrained one
  bool converged = false;
};

// Excess action of minimizers forced through q* + offsets (in units of R).
inline std::vector<GapScanRow> torus_gap_scan(const PerturbationSpec& sp, const RotationVector& w,
                                              const std::vector<std::pair<double, double>>& offsets,
                                              double A_unconstrained, const LabOptions& opt = {}) {
  check_regime(sp, w, opt.epsilon);
  const auto win = lab_window(w);
  const auto L = full_lagrangian(sp);
  const auto topt = lab_through_options(sp, w, win, opt);
  const auto N = lab_cells(win, opt);
  std::vector<GapScanRow> rows(offsets.size());
  parallel_for(offsets.size(), opt.threads, [&](std::size_t i) {
    Vec mid = win.q_star;
    mid[0] += offsets[i].first * sp.R();
    mid[1] += offsets[i].second * sp.R();
    const auto r = minimize_through_point(L, win.qa, mid, win.qb, win.T, 0.5, N, opt.solver, topt);
    rows[i] = {mid[0], mid[1], r.report.excess - A_unconstrained, r.converged};
  });
  return rows;
}

struct DecayRow {
  double k_norm = 0;
  double omega1 = 0;
  double sigma = 0;
  double bump_cost = 0;
  double shift_bound = 0;
  Verdict verdict = Verdict::inconclusive;
};

struct DecayLaws {
  std::vector<DecayRow> rows;
  LinearFit shift_fit;  // ln shift_bound against sqrt(sigma)/|omega_1|
  LinearFit bump_fit;   // ln bump_cost against ln |omega_1|
};

// Certificates along an approximant sequence, with n = |k| and the working
// rotation vector K omega of each frame.
inline DecayLaws decay_laws(const RotationVector& w, const std::vector<Approximant>& seq, double a,
                            double s, const LabOptions& opt = {}) {
  require(seq.size() >= 3, "decay_laws: need >= 3 approximants");
  DecayLaws out;
  out.rows.resize(seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const auto frame = build_frame(seq[i].k, w);
    auto sp = spec_for_frame(frame, a, s, 4.5);
    const auto ww = working_rotation_from_frame(frame, w);
    const auto c = certify_gap(sp, ww, opt);
    out.rows[i] = {sp.n, sp.omega1_abs, sp.sigma(), c.bump.cost, c.shift_bound, c.verdict};
  }
  Vec xs, ys, xb, yb;
  for (const auto& r : out.rows) {
    if (r.shift_bound > 0) {
      xs.push_back(std::sqrt(r.sigma) / r.omega1);
      ys.push_back(std::log(r.shift_bound));
    }
    if (r.bump_cost > 0) {
      xb.push_back(std::log(r.omega1));
      yb.push_back(std::log(r.bump_cost));
    }
  }
  require(xs.size() >= 3 && xb.size() >= 3, "decay_laws: too few usable rows for the fits");
  out.shift_fit = fit_line(xs, ys);
  out.bump_fit = fit_line(xb, yb);
  return out;
}

}  // namespace lagtorus
