// One PASS/FAIL line per acceptance criterion, with measured values and runtime.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "lagtorus/destruction_lab.hpp"
#include "lagtorus/diophantine.hpp"
#include "lagtorus/lattice_frame.hpp"
#include "lagtorus/minimizer.hpp"
#include "lagtorus/pendulum.hpp"
#include "lagtorus/perturbation.hpp"

using namespace lagtorus;

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = dt < budget_s;
  const bool pass = o.ok && in_time;
  if (!pass) ++failures;
  std::printf("%s C%d %s: %s; runtime %.2f s (budget %.0f s%s)\n", pass ? "PASS" : "FAIL", id, name,
              o.detail.c_str(), dt, budget_s, in_time ? "" : ", exceeded");
  std::fflush(stdout);
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

// Phi^T J Phi from K and K^{-T}, entry by entry.
bool symplectic_by_hand(const SymplecticBlock& b) {
  const std::size_t n = b.K.size(), m = 2 * n;
  std::vector<std::vector<Rational>> phi(m, std::vector<Rational>(m, 0)), J(m, std::vector<Rational>(m, 0));
  for (std::size_t i = 0; i < n; ++i) {
    J[i][n + i] = 1;
    J[n + i][i] = -1;
    for (std::size_t j = 0; j < n; ++j) {
      phi[i][j] = b.K[i][j];
      phi[n + i][n + j] = b.K_inv_T[i][j];
    }
  }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      Rational s = 0;
      for (std::size_t a = 0; a < m; ++a)
        for (std::size_t c = 0; c < m; ++c) s += phi[a][i] * J[a][c] * phi[c][j];
      if (s != J[i][j]) return false;
    }
  return true;
}

Outcome c1() {
  std::vector<LatticeFrame> frames;
  const RotationVector g({1.0, kGolden});
  for (const auto& a : find_approximants(g, 100, 1.0)) frames.push_back(build_frame(a.k, g));
  const RotationVector c({1.0, std::cbrt(2.0), std::cbrt(4.0)});
  for (const auto& a : find_approximants(c, 100, 1.0)) frames.push_back(build_frame(a.k, c));
  std::size_t bad_sym = 0, bad_orth = 0;
  for (const auto& f : frames) {
    for (std::size_t i = 0; i < f.rows.size(); ++i)
      for (std::size_t j = i + 1; j < f.rows.size(); ++j) {
        BigInt dot = 0;
        for (std::size_t t = 0; t < f.rows[i].size(); ++t) dot += BigInt(f.rows[i][t]) * f.rows[j][t];
        if (dot != 0) ++bad_orth;
      }
    const auto b = build_symplectic(f);
    if (!symplectic_by_hand(b) || !is_symplectic(b)) ++bad_sym;
  }
  std::ostringstream os;
  os << frames.size() << " frames, " << bad_sym << " symplectic defects, " << bad_orth
     << " nonzero row dot products";
  return {frames.size() >= 20 && bad_sym == 0 && bad_orth == 0, os.str()};
}

std::set<IVec> convergent_oracle(double w1, double w2, int max_norm, double C) {
  std::set<IVec> out;
  long double x = static_cast<long double>(w2) / w1;
  std::int64_t p_prev = 1, q_prev = 0, p = static_cast<std::int64_t>(std::floor(x)), q = 1;
  long double frac = x - std::floor(x);
  for (int it = 0; it < 60; ++it) {
    const double nk = std::hypot(double(p), double(q));
    if (nk > max_norm) break;
    if (std::abs(double(p) * w1 - double(q) * w2) < C / nk) {
      IVec k{p, -q};
      if (k[0] < 0 || (k[0] == 0 && k[1] < 0)) k = {-k[0], -k[1]};
      out.insert(k);
    }
    if (frac == 0) break;
    const long double inv = 1.0L / frac;
    const auto a = static_cast<std::int64_t>(std::floor(inv));
    frac = inv - a;
    const auto pn = a * p + p_prev, qn = a * q + q_prev;
    p_prev = p;
    q_prev = q;
    p = pn;
    q = qn;
  }
  return out;
}

Outcome c2() {
  const RotationVector w({1.0, kGolden});
  std::set<IVec> got;
  for (const auto& a : find_approximants(w, 100, 1.0)) got.insert(a.k);
  const auto want = convergent_oracle(1.0, kGolden, 100, 1.0);
  std::ostringstream os;
  os << got.size() << " approximants, oracle " << want.size() << ", sets " << (got == want ? "equal" : "differ");
  return {got == want && !got.empty(), os.str()};
}

Outcome c3() {
  Vec sig, fr;
  for (int i = 0; i < 10; ++i) {
    sig.push_back(std::pow(10.0, -2.0 + 2.0 * i / 9));
    fr.push_back(0.05 + 0.9 * i / 9);
  }
  const auto r = pendulum_identity_suite(sig, fr, 10.0, 200, 1e-6, 1e-8);
  double worst_cell = 0;
  for (double x : r.argmin_offsets) worst_cell = std::max(worst_cell, x);
  const std::string d = std::to_string(r.rows.size()) + " cells, slope err " + fmt("%.2e", r.worst_slope_err) +
                        ", roundtrip err " + fmt("%.2e", r.worst_roundtrip_err) + ", unimodal " +
                        (r.unimodal_ok ? "yes" : "no") + ", argmin offset " + fmt("%.2f", worst_cell) + " cells";
  return {r.rows.size() == 100 && r.passed(), d};
}

Outcome c4() {
  const double s = 0.1;
  Vec a, b;
  for (int i = 0; i < 20; ++i) {
    a.push_back((6.0 + 10.0 * i / 19) / std::sqrt(s));
    b.push_back((6.0 + 10.0 * i / 19) / std::sqrt(s / 4));
  }
  const auto fa = separatrix_law_fit(PendulumParams(s), a);
  const auto fb = separatrix_law_fit(PendulumParams(s / 4), b);
  const double ratio = fa.slope / fb.slope;
  const bool ok = fa.r_squared >= 0.9999 && fb.r_squared >= 0.9999 && std::abs(ratio - 2.0) <= 0.1;
  return {ok, "R^2 " + fmt("%.6f", fa.r_squared) + " / " + fmt("%.6f", fb.r_squared) + ", slope ratio " +
                  fmt("%.4f", ratio)};
}

PerturbationSpec working_spec(double n, double peak_scale = 1.0) {
  PerturbationSpec sp;
  sp.n = n;
  sp.a = 1;
  sp.s = 1;
  sp.d = 2;
  sp.omega1_abs = golden_working_rotation(n)[0];
  sp.peak_scale = peak_scale;
  return sp;
}

Outcome c5() {
  Vec lx, ly;
  std::string d;
  bool conv = true;
  for (double n : {8.0, 16.0, 32.0}) {
    const auto w = golden_working_rotation(n);
    const auto c = certify_gap(working_spec(n), w);
    conv = conv && c.through.converged;
    const double dev = velocity_deviation(c.through.path, {1});
    lx.push_back(std::log(w[0]));
    ly.push_back(std::log(dev));
    d += "n=" + fmt("%.0f", n) + " dev " + fmt("%.3e", dev) + ", ";
  }
  const auto f = fit_line(lx, ly);
  return {conv && std::abs(f.slope - 2.0) <= 0.3, d + "slope " + fmt("%.3f", f.slope)};
}

Outcome c6() {
  const double n = 16;
  const auto w = golden_working_rotation(n);
  const auto c = certify_gap(working_spec(n), w);
  const auto z = certify_gap(working_spec(n, 0.0), w);
  const bool ok = c.verdict == Verdict::gap && c.gap > 0 && c.bump.cost >= 10.0 * c.shift_bound &&
                  z.verdict == Verdict::no_gap;
  return {ok, std::string("verdict ") + to_string(c.verdict) + ", gap " + fmt("%.3e", c.gap) + ", bump " +
                  fmt("%.3e", c.bump.cost) + ", shift bound " + fmt("%.3e", c.shift_bound) +
                  ", v=0 verdict " + to_string(z.verdict)};
}

Outcome c7() {
  const RotationVector g({1.0, kGolden});
  std::vector<Approximant> tail;
  for (const auto& a : find_approximants(g, 100, 1.0))
    if (a.norm > 5) tail.push_back(a);
  const auto dl = decay_laws(g, tail, 1.0, 1.0);
  const bool ok = dl.shift_fit.r_squared >= 0.99 && dl.bump_fit.r_squared >= 0.99;
  return {ok, std::to_string(dl.rows.size()) + " approximants, shift R^2 " + fmt("%.5f", dl.shift_fit.r_squared) +
                  " (slope " + fmt("%.3f", dl.shift_fit.slope) + "), bump R^2 " +
                  fmt("%.5f", dl.bump_fit.r_squared) + " (slope " + fmt("%.3f", dl.bump_fit.slope) + ")"};
}

Outcome c8() {
  const RotationVector w({1.0, kGolden});
  const auto seq = find_approximants(w, 100, 1.0);
  NormGridConfig cfg;
  cfg.convergence_check = false;
  const auto rep = norm_decay_report(w, seq, 1.0, {0, 1, 2}, 12.0, 4.5, cfg);
  bool ok = true, monotone = true;
  std::string d;
  for (std::size_t i = 0; i < rep.r_list.size(); ++i) {
    const double want = rep.expected_slopes[i];
    ok = ok && std::abs(rep.slopes[i] - want) <= 0.15 * std::abs(want);
    d += "r=" + std::to_string(rep.r_list[i]) + " slope " + fmt("%.3f", rep.slopes[i]) + " (want " +
         fmt("%.0f", want) + "), ";
    double prev = INFINITY;
    for (const auto& row : rep.rows)
      if (row.r == rep.r_list[i] && row.k_norm >= cfg.fit_min_norm) {
        monotone = monotone && row.norm < prev;
        prev = row.norm;
      }
  }
  return {ok && monotone, d + "tail monotone " + std::string(monotone ? "yes" : "no")};
}

// Worst change of the excess action under random moves of the free nodes.
double worst_improvement(const Lagrangian& L, const DiscretePath& p, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> G(0.0, scale);
  const double base = discrete_action(L, p).excess;
  double worst = INFINITY;
  for (int t = 0; t < 100; ++t) {
    DiscretePath q = p;
    for (std::size_t i = 1; i + 1 < q.size(); ++i) {
      if (std::find(q.pinned.begin(), q.pinned.end(), i) != q.pinned.end()) continue;
      for (auto& x : q.nodes[i]) x += G(rng);
    }
    worst = std::min(worst, discrete_action(L, q).excess - base);
  }
  return worst;
}

Outcome c9() {
  const double tol = 1e-8;
  std::mt19937_64 rng(20261016);
  std::string d;
  bool ok = true;
  const double n = 16;
  const auto sp = working_spec(n);
  const auto c = certify_gap(sp, golden_working_rotation(n));
  const auto L = full_lagrangian(sp);
  const DiscretePath* lab_paths[] = {&c.through.path, &c.detours.plus.path, &c.detours.minus.path};
  const char* names[] = {"through", "detour+", "detour-"};
  for (int i = 0; i < 3; ++i)
    for (double scale : {0.05 * sp.R(), 1e-4 * sp.R()}) {
      const double w = worst_improvement(L, *lab_paths[i], scale, rng);
      ok = ok && w >= -tol;
      d += std::string(names[i]) + " " + fmt("%.1e", w) + ", ";
    }
  const auto win = lab_window(golden_working_rotation(n));
  const auto direct = minimize_fixed_endpoints(L, win.qa, win.qb, win.T, lab_cells(win, {}));
  ok = ok && direct.converged && c.converged;
  for (double scale : {0.05 * sp.R(), 1e-4 * sp.R()}) {
    const double wd = worst_improvement(L, direct.path, scale, rng);
    ok = ok && wd >= -tol;
    d += "direct " + fmt("%.1e", wd) + ", ";
  }

  const double sigma = 0.5, T = 8.0;
  const Lagrangian P({1.0, 1.0}, sigma, 0.0, BumpField(0.0, 0.1));
  const Vec qa{0.0, 0.0}, qb{kTwoPi, 1.0};
  const double exact = two_leg_action(T / 2, 0, T, PendulumParams(sigma)) + 0.5 / T;
  Vec err;
  for (std::size_t N : {100, 200, 400}) {
    const auto r = minimize_fixed_endpoints(P, qa, qb, T, N);
    ok = ok && r.converged;
    if (N == 200) {
      for (double scale : {1e-3, 1e-7}) {
        const double wp = worst_improvement(P, r.path, scale, rng);
        ok = ok && wp >= -tol;
        d += "pendulum " + fmt("%.1e", wp) + ", ";
      }
    }
    err.push_back(r.report.total_action - exact);
  }
  const double o1 = std::log2(err[0] / err[1]), o2 = std::log2(err[1] / err[2]);
  ok = ok && std::abs(o1 - 2.0) <= 0.2 && std::abs(o2 - 2.0) <= 0.2;
  return {ok, "worst change " + d + "orders " + fmt("%.3f", o1) + " / " + fmt("%.3f", o2)};
}

}  // namespace

int main() {
  criterion(1, "symplectic exactness", 1, c1);
  criterion(2, "diophantine oracle equivalence", 1, c2);
  criterion(3, "pendulum identity suite", 30, c3);
  criterion(4, "separatrix law", 10, c4);
  criterion(5, "velocity bound scaling", 300, c5);
  criterion(6, "gap certificate", 300, c6);
  criterion(7, "two decay laws", 600, c7);
  criterion(8, "norm decay", 120, c8);
  criterion(9, "minimizer soundness", 120, c9);
  std::printf("%s: %d of 9 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
