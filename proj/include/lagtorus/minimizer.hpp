#pragma once

// Discrete action minimizers in the universal cover.
//
// Paths are node sequences on a (possibly graded) time mesh. The kinetic and
// pendulum terms use the midpoint rule on each segment; the bump term is
// integrated along each straight segment, because at useful mesh sizes the
// bump support is far smaller than one step.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "lagtorus/common.hpp"
#include "lagtorus/diophantine.hpp"
#include "lagtorus/perturbation.hpp"

namespace lagtorus {

struct DiscretePath {
  Vec times;                   // strictly increasing, one entry per node
  std::vector<Vec> nodes;      // lifted positions
  std::vector<std::size_t> pinned;  // interior nodes held by a point constraint

  std::size_t size() const { return nodes.size(); }
  std::size_t dim() const { return nodes.empty() ? 0 : nodes.front().size(); }
  double t_start() const { return times.front(); }
  double t_end() const { return times.back(); }
  double duration() const { return times.back() - times.front(); }
  double h(std::size_t i) const { return times[i + 1] - times[i]; }

  double min_step() const {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < times.size(); ++i) m = std::min(m, h(i));
    return m;
  }
  double max_step() const {
    double m = 0;
    for (std::size_t i = 0; i + 1 < times.size(); ++i) m = std::max(m, h(i));
    return m;
  }

  // Whole turns between the end points, per coordinate.
  IVec winding() const {
    IVec w(dim());
    for (std::size_t j = 0; j < dim(); ++j)
      w[j] = static_cast<std::int64_t>(std::floor((nodes.back()[j] - nodes.front()[j]) / kTwoPi));
    return w;
  }

  void validate() const {
    require(nodes.size() >= 3, "path: need >= 3 nodes");
    require(times.size() == nodes.size(), "path: times and nodes differ in length");
    for (std::size_t i = 0; i + 1 < times.size(); ++i)
      require(times[i + 1] > times[i], "path: times must increase strictly");
    for (const auto& q : nodes) {
      require(q.size() == dim(), "path: nodes of mixed dimension");
      for (double v : q) require(std::isfinite(v), "path: non-finite node");
    }
  }

  static DiscretePath uniform(double t0, double T, std::vector<Vec> nodes) {
    DiscretePath p;
    const std::size_t n = nodes.size();
    require(n >= 3 && T > 0, "uniform path: need >= 3 nodes and T > 0");
    p.times.resize(n);
    for (std::size_t i = 0; i < n; ++i) p.times[i] = t0 + T * static_cast<double>(i) / (n - 1);
    p.times.back() = t0 + T;
    p.nodes = std::move(nodes);
    return p;
  }

  static DiscretePath straight(const Vec& qa, const Vec& qb, const Vec& times) {
    require(qa.size() == qb.size(), "straight path: endpoint dimension mismatch");
    DiscretePath p;
    p.times = times;
    const double t0 = times.front(), T = times.back() - times.front();
    for (double t : times) {
      const double s = (t - t0) / T;
      Vec q(qa.size());
      for (std::size_t j = 0; j < q.size(); ++j) q[j] = qa[j] + s * (qb[j] - qa[j]);
      p.nodes.push_back(q);
    }
    p.nodes.front() = qa;
    p.nodes.back() = qb;
    return p;
  }
};

// 8 (|omega| + sqrt(sigma) + 1)
inline double speed_cap(const Vec& omega_work, double sigma) {
  return 8.0 * (norm(omega_work) + std::sqrt(std::max(0.0, sigma)) + 1.0);
}

// Normalized mesh on [0, 1] with `cells` roughly uniform cells, refined
// geometrically (ratio `growth`) down to `fine` next to the end selected by
// `fine_at_end`. fine <= 0 gives a uniform mesh.
inline Vec graded_unit_mesh(std::size_t cells, double fine, double growth, bool fine_at_end) {
  require(cells >= 2, "mesh: need >= 2 cells");
  const double coarse = 1.0 / static_cast<double>(cells);
  Vec steps;
  if (fine > 0 && fine < coarse) {
    require(growth > 1, "mesh: growth must exceed 1");
    double used = 0;
    for (double s = fine; s < coarse && used + s < 0.5; s *= growth) {
      steps.push_back(s);
      used += s;
    }
    const double rest = 1.0 - used;
    const auto m = static_cast<std::size_t>(std::max(1.0, std::ceil(rest / coarse - 1e-9)));
    std::reverse(steps.begin(), steps.end());
    steps.insert(steps.begin(), m, rest / static_cast<double>(m));
  } else {
    steps.assign(cells, coarse);
  }
  if (!fine_at_end) std::reverse(steps.begin(), steps.end());
  Vec tau{0.0};
  long double acc = 0;
  for (double s : steps) tau.push_back(static_cast<double>(acc += s));
  tau.back() = 1.0;
  return tau;
}

struct ActionReport {
  double total_action = 0;
  double pendulum_part = 0;   // q1 kinetic term plus the pendulum potential
  double kinetic_Q_part = 0;  // kinetic energy of q2..qd
  double bump_part = 0;       // time integral of the bump term
  double chord_action = 0;    // kinetic action of the straight chord with the same ends
  double excess = 0;          // total - chord_action, computed without cancellation
  double el_residual = 0;     // max |dA/dq_i| over free interior nodes
  double max_speed = 0;
};

namespace detail {

struct Evaluation {
  long double pend = 0, kin_q = 0, bump = 0, excess = 0;
  double chord = 0;
  double max_speed = 0;
  Vec grad;  // flat, node-major
};

// q(t) = base + vel (t - t0): the straight chord between the end points.
struct Chord {
  Vec base, vel;
  double t0 = 0;

  double at(std::size_t j, double t) const { return base[j] + vel[j] * (t - t0); }
};

inline Chord chord_of(const Vec& times, const Vec& qa, const Vec& qb) {
  Chord c{qa, Vec(qa.size()), times.front()};
  const double T = times.back() - times.front();
  for (std::size_t j = 0; j < qa.size(); ++j) c.vel[j] = (qb[j] - qa[j]) / T;
  return c;
}

// Nodes are handled as deviations y from the chord. Near a pinned node with
// q1 ~ pi and tiny steps, differences of stored positions would be dominated
// by rounding; differences of deviations are not.
// Built from node differences, so the large chord values never enter.
inline Vec deviations(const std::vector<Vec>& nodes, const Vec& times, const Chord& c) {
  const std::size_t d = c.base.size();
  Vec y(nodes.size() * d);
  for (std::size_t j = 0; j < d; ++j) {
    long double acc = nodes[0][j] - c.base[j];
    y[j] = static_cast<double>(acc);
    for (std::size_t i = 1; i < nodes.size(); ++i) {
      acc += (nodes[i][j] - nodes[i - 1][j]) - c.vel[j] * (times[i] - times[i - 1]);
      y[i * d + j] = static_cast<double>(acc);
    }
  }
  return y;
}

// Inverse of deviations(): positions accumulated from the end point next to
// the finer steps, so rounding there stays relative to small local values.
inline std::vector<Vec> positions(const Vec& y, const Vec& times, const Chord& c, const Vec& qa,
                                  const Vec& qb) {
  const std::size_t d = c.base.size(), n = times.size();
  std::vector<Vec> nodes(n, Vec(d));
  const bool backward = times[n - 1] - times[n - 2] < times[1] - times[0];
  for (std::size_t j = 0; j < d; ++j) {
    if (backward) {
      long double q = qb[j];
      nodes[n - 1][j] = qb[j];
      for (std::size_t i = n - 1; i-- > 0;) {
        q -= c.vel[j] * (times[i + 1] - times[i]) + (y[(i + 1) * d + j] - y[i * d + j]);
        nodes[i][j] = static_cast<double>(q);
      }
    } else {
      long double q = qa[j];
      nodes[0][j] = qa[j];
      for (std::size_t i = 1; i < n; ++i) {
        q += c.vel[j] * (times[i] - times[i - 1]) + (y[i * d + j] - y[(i - 1) * d + j]);
        nodes[i][j] = static_cast<double>(q);
      }
    }
  }
  nodes.front() = qa;
  nodes.back() = qb;
  return nodes;
}

// Action pieces and gradient for deviation data y (size n*d). Gradient
// entries at the two end nodes omit the constant chord momentum.
inline Evaluation evaluate(const Lagrangian& L, const Vec& times, const Vec& y, const Chord& c,
                           bool want_grad) {
  const std::size_t n = times.size(), d = c.base.size();
  const Vec& m = L.masses();
  Evaluation ev;
  if (want_grad) ev.grad.assign(n * d, 0.0);
  const double T = times.back() - times.front();
  for (std::size_t j = 0; j < d; ++j) ev.chord += 0.5 * m[j] * c.vel[j] * c.vel[j] * T;
  const double cp = L.pendulum_coeff(), cb = L.bump_coeff();
  const bool bump = L.has_bump();
  Vec qa(d), qb(d);
  for (std::size_t j = 0; j < d; ++j) qb[j] = c.at(j, times[0]) + y[j];
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double h = times[i + 1] - times[i];
    std::swap(qa, qb);
    for (std::size_t j = 0; j < d; ++j) qb[j] = c.at(j, times[i + 1]) + y[(i + 1) * d + j];
    double speed2 = 0;
    for (std::size_t j = 0; j < d; ++j) {
      const double dy = y[(i + 1) * d + j] - y[i * d + j];
      const double dq = c.vel[j] * h + dy;
      speed2 += dq * dq;
      (j == 0 ? ev.pend : ev.kin_q) += 0.5 * m[j] * dq * dq / h;
      ev.excess += 0.5 * m[j] * dy * dy / h;
      if (want_grad) {
        const double g = m[j] * dy / h;
        ev.grad[i * d + j] -= g;
        ev.grad[(i + 1) * d + j] += g;
      }
    }
    ev.max_speed = std::max(ev.max_speed, std::sqrt(speed2) / h);
    const double mid = 0.5 * (qa[0] + qb[0]);
    const double pot = h * cp * (1.0 - std::cos(mid));
    ev.pend += pot;
    ev.excess += pot;
    if (want_grad) {
      const double g = 0.5 * h * cp * std::sin(mid);
      ev.grad[i * d] += g;
      ev.grad[(i + 1) * d] += g;
    }
    if (bump) {
      const auto s = L.bump().segment(qa.data(), qb.data(), h, want_grad);
      ev.bump += cb * s.value;
      ev.excess += cb * s.value;
      if (want_grad) {
        for (int j = 0; j < 2; ++j) {
          ev.grad[i * d + j] += cb * s.grad_a[j];
          ev.grad[(i + 1) * d + j] += cb * s.grad_b[j];
        }
      }
    }
  }
  return ev;
}

inline Evaluation evaluate_path(const Lagrangian& L, const DiscretePath& p, bool want_grad) {
  const auto c = chord_of(p.times, p.nodes.front(), p.nodes.back());
  return evaluate(L, p.times, deviations(p.nodes, p.times, c), c, want_grad);
}

// max over free interior nodes of |dA/dq_i|.
inline double el_residual(const Vec& grad, std::size_t n, std::size_t d,
                          const std::vector<std::size_t>& pinned) {
  double r = 0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (std::find(pinned.begin(), pinned.end(), i) != pinned.end()) continue;
    for (std::size_t j = 0; j < d; ++j) r = std::max(r, std::abs(grad[i * d + j]));
  }
  return r;
}

inline ActionReport to_report(const Evaluation& ev, const Vec& times, std::size_t d,
                              const std::vector<std::size_t>& pinned) {
  ActionReport r;
  r.pendulum_part = static_cast<double>(ev.pend);
  r.kinetic_Q_part = static_cast<double>(ev.kin_q);
  r.bump_part = static_cast<double>(ev.bump);
  r.total_action = static_cast<double>(ev.pend + ev.kin_q + ev.bump);
  r.chord_action = ev.chord;
  r.excess = static_cast<double>(ev.excess);
  r.max_speed = ev.max_speed;
  if (!ev.grad.empty()) r.el_residual = el_residual(ev.grad, times.size(), d, pinned);
  return r;
}

// Solves the kinetic tridiagonal system on the free interior nodes, one
// coordinate at a time (Thomas algorithm). Fixed nodes pass through as 0.
inline Vec precondition(const Vec& g, const Vec& times, const Vec& masses, std::size_t d) {
  const std::size_t n = times.size();
  Vec z(g.size(), 0.0);
  const std::size_t m = n - 2;
  Vec c(m), r(m);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t i = k + 1;
      const double hl = times[i] - times[i - 1], hr = times[i + 1] - times[i];
      const double diag = masses[j] * (1.0 / hl + 1.0 / hr);
      const double lower = k > 0 ? -masses[j] / hl : 0.0;
      const double upper = -masses[j] / hr;
      const double denom = diag - (k > 0 ? lower * c[k - 1] : 0.0);
      c[k] = upper / denom;
      r[k] = (g[i * d + j] - (k > 0 ? lower * r[k - 1] : 0.0)) / denom;
    }
    for (std::size_t k = m; k-- > 0;) {
      const double next = k + 1 < m ? z[(k + 2) * d + j] : 0.0;
      z[(k + 1) * d + j] = r[k] - c[k] * next;
    }
  }
  return z;
}

}  // namespace detail

// Midpoint-rule action of a path; throws if a segment exceeds `cap`.
inline ActionReport discrete_action(const Lagrangian& L, const DiscretePath& path,
                                    double cap = std::numeric_limits<double>::infinity()) {
  path.validate();
  require(path.dim() == L.dim(), "discrete_action: path and Lagrangian dimensions differ");
  const auto ev = detail::evaluate_path(L, path, true);
  if (ev.max_speed > cap)
    throw PreconditionError("discrete_action: speed cap " + std::to_string(cap) +
                            " exceeded (max segment speed " + std::to_string(ev.max_speed) + ")");
  return detail::to_report(ev, path.times, path.dim(), path.pinned);
}

struct MinimizerOptions {
  double tol = 1e-8;  // on the max gradient entry
  long max_iter = 100000;
  double cap = std::numeric_limits<double>::infinity();
  long restart_every = 0;  // 0: number of free nodes
};

struct MinimizeResult {
  DiscretePath path;
  ActionReport report;
  long iterations = 0;
  bool converged = false;
  std::string diagnostic;
};

// Preconditioned nonlinear conjugate gradients (Polak-Ribiere+) on the free
// interior nodes; end points and pinned nodes stay fixed.
inline MinimizeResult minimize_path(const Lagrangian& L, DiscretePath init,
                                    const MinimizerOptions& opt = {}) {
  init.validate();
  const std::size_t d = init.dim(), n = init.size();
  require(d == L.dim(), "minimize: path and Lagrangian dimensions differ");
  require(opt.tol > 0, "minimize: tol must be positive");
  const Vec& times = init.times;
  std::vector<char> fixed(n, 0);
  fixed.front() = fixed.back() = 1;
  for (auto p : init.pinned) {
    require(p > 0 && p + 1 < n, "minimize: pinned index must be interior");
    fixed[p] = 1;
  }
  auto mask = [&](Vec& v) {
    for (std::size_t i = 0; i < n; ++i)
      if (fixed[i])
        for (std::size_t j = 0; j < d; ++j) v[i * d + j] = 0.0;
  };
  const auto chord = detail::chord_of(times, init.nodes.front(), init.nodes.back());
  auto eval = [&](const Vec& x) {
    auto ev = detail::evaluate(L, times, x, chord, true);
    mask(ev.grad);
    return ev;
  };
  auto objective = [&](const detail::Evaluation& ev) {
    return ev.max_speed > opt.cap ? std::numeric_limits<double>::infinity()
                                  : static_cast<double>(ev.excess);
  };
  // Pinned nodes split the path into independent blocks; the preconditioner
  // treats each block between fixed nodes on its own.
  auto precond = [&](const Vec& g) {
    Vec z(g.size(), 0.0);
    std::size_t a = 0;
    for (std::size_t b = 1; b < n; ++b) {
      if (!fixed[b]) continue;
      if (b - a >= 2) {
        const Vec sub_t(times.begin() + static_cast<long>(a), times.begin() + static_cast<long>(b + 1));
        const Vec sub_g(g.begin() + static_cast<long>(a * d), g.begin() + static_cast<long>((b + 1) * d));
        const Vec sz = detail::precondition(sub_g, sub_t, L.masses(), d);
        for (std::size_t i = 1; i + 1 < sub_t.size(); ++i)
          for (std::size_t j = 0; j < d; ++j) z[(a + i) * d + j] = sz[i * d + j];
      }
      a = b;
    }
    return z;
  };

  Vec x = detail::deviations(init.nodes, times, chord);
  auto ev = eval(x);
  double f = objective(ev);
  if (!std::isfinite(f))
    throw PreconditionError("minimize: initial path exceeds the speed cap");
  Vec g = ev.grad;
  Vec z = precond(g);
  Vec dir(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) dir[i] = -z[i];
  const long restart = opt.restart_every > 0 ? opt.restart_every
                                             : static_cast<long>(std::max<std::size_t>(n - 2, 1) * d);
  double alpha_prev = 1.0, gd_prev = 0.0;
  MinimizeResult out;
  long since_restart = 0;
  bool fresh = true;
  const double eps = std::numeric_limits<double>::epsilon();

  for (long it = 0;; ++it) {
    const double res = detail::el_residual(g, n, d, init.pinned);
    if (res <= opt.tol) {
      out.converged = true;
      out.iterations = it;
      break;
    }
    if (it >= opt.max_iter) {
      out.iterations = it;
      out.diagnostic = "iteration cap reached, residual " + std::to_string(res);
      break;
    }
    double gd = dot(g, dir);
    if (!(gd < 0)) {
      for (std::size_t i = 0; i < z.size(); ++i) dir[i] = -z[i];
      gd = dot(g, dir);
      fresh = true;
      since_restart = 0;
    }
    double alpha = fresh ? 1.0 : std::min(1.0, alpha_prev * gd_prev / gd);
    if (!(alpha > 0) || !std::isfinite(alpha)) alpha = 1.0;

    auto trial = [&](double a, Vec& xt) {
      xt = x;
      for (std::size_t i = 0; i < x.size(); ++i) xt[i] += a * dir[i];
      return eval(xt);
    };
    const double slack = 8 * eps * std::max(1.0, std::abs(f));
    Vec xt;
    detail::Evaluation et;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      et = trial(alpha, xt);
      const double ft = objective(et);
      if (ft <= f + 1e-4 * alpha * gd + slack) {
        // One interpolation step towards the 1-D minimum.
        const double curv = ft - f - gd * alpha;
        if (curv > 0) {
          const double aq = -gd * alpha * alpha / (2 * curv);
          if (aq > 0 && aq < 4 * alpha && std::abs(aq / alpha - 1) > 0.1) {
            Vec xq;
            auto eq = trial(aq, xq);
            if (objective(eq) < ft) {
              alpha = aq;
              xt = std::move(xq);
              et = std::move(eq);
            }
          }
        }
        accepted = true;
        break;
      }
      double next = 0.5 * alpha;
      if (std::isfinite(ft)) {
        const double curv = ft - f - gd * alpha;
        if (curv > 0) next = std::clamp(-gd * alpha * alpha / (2 * curv), 0.1 * alpha, 0.5 * alpha);
      }
      alpha = next;
    }
    if (!accepted) {
      if (!fresh) {
        for (std::size_t i = 0; i < z.size(); ++i) dir[i] = -z[i];
        fresh = true;
        since_restart = 0;
        continue;
      }
      out.iterations = it;
      out.diagnostic = "line search failed, residual " + std::to_string(res);
      break;
    }
    const Vec g_old = g, z_old = z;
    x = std::move(xt);
    ev = std::move(et);
    f = objective(ev);
    g = ev.grad;
    z = precond(g);
    alpha_prev = alpha;
    gd_prev = gd;
    ++since_restart;
    double beta = 0;
    if (since_restart < restart) {
      double num = 0, den = 0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        num += z[i] * (g[i] - g_old[i]);
        den += z_old[i] * g_old[i];
      }
      beta = den > 0 ? std::max(0.0, num / den) : 0.0;
    } else {
      since_restart = 0;
    }
    for (std::size_t i = 0; i < dir.size(); ++i) dir[i] = -z[i] + beta * dir[i];
    fresh = beta == 0;
  }
  out.path = init;
  out.path.nodes = detail::positions(x, times, chord, init.nodes.front(), init.nodes.back());
  for (std::size_t i = 0; i < n; ++i)
    if (fixed[i]) out.path.nodes[i] = init.nodes[i];
  auto full = detail::evaluate(L, times, x, chord, true);
  out.report = detail::to_report(full, times, d, init.pinned);
  return out;
}

// Uniform mesh of N cells, straight-line start.
inline MinimizeResult minimize_fixed_endpoints(const Lagrangian& L, const Vec& qa, const Vec& qb,
                                               double T, std::size_t N,
                                               const MinimizerOptions& opt = {},
                                               double t0 = 0.0) {
  require(T > 0, "minimize_fixed_endpoints: T must be positive");
  require(N >= 8, "minimize_fixed_endpoints: N must be >= 8");
  require(qa.size() == L.dim() && qb.size() == L.dim(), "minimize_fixed_endpoints: dimension mismatch");
  Vec times(N + 1);
  for (std::size_t i = 0; i <= N; ++i) times[i] = t0 + T * static_cast<double>(i) / N;
  times.back() = t0 + T;
  return minimize_path(L, DiscretePath::straight(qa, qb, times), opt);
}

struct ThroughOptions {
  bool optimize_split = true;
  double split_lo = 0.05, split_hi = 0.95;  // search window for the split
  double fine_step = 0;   // smallest step next to the glue node (time units); 0: uniform
  double growth = 1.15;
  int split_bits = 40;    // Brent precision in bits
  long max_split_evals = 200;
};

struct SplitSample {
  double split = 0;
  double excess = 0;
};

struct ThroughPointResult {
  DiscretePath path;      // glued path; the glue node is listed in path.pinned
  ActionReport report;
  double split = 0.5;
  double t_mid = 0;
  bool converged = false;
  std::size_t glue_index = 0;
  std::vector<SplitSample> scan;
  std::string diagnostic;
};

namespace detail {

// Node data of `src` resampled at normalized times tau by linear interpolation.
inline std::vector<Vec> resample(const DiscretePath& src, const Vec& tau) {
  std::vector<Vec> out;
  const double s0 = src.t_start(), S = src.duration();
  std::size_t k = 0;
  for (double u : tau) {
    const double t = s0 + u * S;
    while (k + 2 < src.size() && src.times[k + 1] < t) ++k;
    const double w = std::clamp((t - src.times[k]) / src.h(k), 0.0, 1.0);
    Vec q(src.dim());
    for (std::size_t j = 0; j < q.size(); ++j)
      q[j] = (1 - w) * src.nodes[k][j] + w * src.nodes[k + 1][j];
    out.push_back(std::move(q));
  }
  return out;
}

}  // namespace detail

// Minimizer constrained to visit q_mid; two fixed-end problems glued at the
// interior time t0 + split * T, with the split optionally optimized (Brent).
inline ThroughPointResult minimize_through_point(const Lagrangian& L, const Vec& qa,
                                                 const Vec& qmid, const Vec& qb, double T_total,
                                                 double split, std::size_t N,
                                                 const MinimizerOptions& opt = {},
                                                 const ThroughOptions& topt = {},
                                                 double t0 = 0.0) {
  require(split > 0 && split < 1, "minimize_through_point: split must lie in (0, 1)");
  require(T_total > 0, "minimize_through_point: T must be positive");
  require(N >= 8, "minimize_through_point: N must be >= 8");
  require(qa.size() == L.dim() && qmid.size() == L.dim() && qb.size() == L.dim(),
          "minimize_through_point: dimension mismatch");
  require(topt.split_lo > 0 && topt.split_hi < 1 && topt.split_lo < topt.split_hi,
          "minimize_through_point: bad split window");

  // Cells per half and normalized meshes are fixed, so the glued mesh is a
  // smooth function of the split.
  const std::size_t n1 = std::max<std::size_t>(4, N / 2), n2 = std::max<std::size_t>(4, N - N / 2);
  const double half = 0.5 * T_total;
  const double fine_rel = topt.fine_step > 0 ? topt.fine_step / half : 0.0;
  const Vec tau1 = graded_unit_mesh(n1, fine_rel, topt.growth, true);
  const Vec tau2 = graded_unit_mesh(n2, fine_rel, topt.growth, false);

  struct Halves {
    MinimizeResult a, b;
  };
  std::optional<Halves> warm;
  auto solve = [&](double sp) {
    const double tg = t0 + sp * T_total;
    Vec ta(tau1.size()), tb(tau2.size());
    for (std::size_t i = 0; i < tau1.size(); ++i) ta[i] = t0 + tau1[i] * (tg - t0);
    for (std::size_t i = 0; i < tau2.size(); ++i) tb[i] = tg + tau2[i] * (t0 + T_total - tg);
    ta.back() = tg;
    tb.front() = tg;
    tb.back() = t0 + T_total;
    DiscretePath pa, pb;
    if (warm) {
      pa.times = ta;
      pa.nodes = detail::resample(warm->a.path, tau1);
      pb.times = tb;
      pb.nodes = detail::resample(warm->b.path, tau2);
      pa.nodes.front() = qa;
      pa.nodes.back() = qmid;
      pb.nodes.front() = qmid;
      pb.nodes.back() = qb;
    } else {
      pa = DiscretePath::straight(qa, qmid, ta);
      pb = DiscretePath::straight(qmid, qb, tb);
    }
    Halves hv{minimize_path(L, pa, opt), minimize_path(L, pb, opt)};
    return hv;
  };
  auto glue = [&](const Halves& hv) {
    DiscretePath p;
    p.times = hv.a.path.times;
    p.nodes = hv.a.path.nodes;
    p.times.insert(p.times.end(), hv.b.path.times.begin() + 1, hv.b.path.times.end());
    p.nodes.insert(p.nodes.end(), hv.b.path.nodes.begin() + 1, hv.b.path.nodes.end());
    p.pinned = {hv.a.path.size() - 1};
    return p;
  };

  ThroughPointResult out;
  bool all_converged = true;
  auto excess_at = [&](double sp) {
    auto hv = solve(sp);
    all_converged = all_converged && hv.a.converged && hv.b.converged;
    const auto p = glue(hv);
    const auto ev = detail::evaluate_path(L, p, false);
    const double ex = static_cast<double>(ev.excess);
    out.scan.push_back({sp, ex});
    warm = std::move(hv);
    return ex;
  };

  double best = split;
  if (topt.optimize_split) {
    excess_at(split);  // warm start at the requested split
    std::uintmax_t iters = static_cast<std::uintmax_t>(topt.max_split_evals);
    const auto r = boost::math::tools::brent_find_minima(excess_at, topt.split_lo, topt.split_hi,
                                                         topt.split_bits, iters);
    best = r.first;
  }
  auto hv = solve(best);
  all_converged = hv.a.converged && hv.b.converged;
  out.path = glue(hv);
  out.split = best;
  out.t_mid = t0 + best * T_total;
  out.glue_index = out.path.pinned.front();
  out.report = discrete_action(L, out.path);
  out.converged = all_converged;
  if (!all_converged)
    out.diagnostic = "half problem not converged: " + hv.a.diagnostic + " " + hv.b.diagnostic;
  return out;
}

struct RotationOrbit {
  MinimizeResult result;
  double T = 0;          // commensurate window actually used
  IVec turns;            // whole turns between the end points
  Vec realized_rotation; // displacement / T
};

// Minimizer over a window on which omega_1 * T is a whole number of turns,
// with end points q0 and q0 + 2 pi * round(omega T / 2 pi).
inline RotationOrbit rotation_orbit(const Lagrangian& L, const RotationVector& w, double T,
                                    std::size_t N, const MinimizerOptions& opt = {},
                                    Vec q0 = {}) {
  w.validate();
  require(w.dim() == L.dim(), "rotation_orbit: dimension mismatch");
  require(T > 0 && w[0] != 0, "rotation_orbit: need T > 0 and omega_1 != 0");
  if (q0.empty()) q0.assign(w.dim(), 0.0);
  const double turn = kTwoPi / std::abs(w[0]);
  RotationOrbit ro;
  ro.T = std::max(1.0, std::round(T / turn)) * turn;
  Vec qb(w.dim());
  ro.turns.resize(w.dim());
  for (std::size_t j = 0; j < w.dim(); ++j) {
    ro.turns[j] = static_cast<std::int64_t>(std::llround(w[j] * ro.T / kTwoPi));
    qb[j] = q0[j] + kTwoPi * static_cast<double>(ro.turns[j]);
  }
  ro.result = minimize_fixed_endpoints(L, q0, qb, ro.T, N, opt);
  for (std::size_t j = 0; j < w.dim(); ++j) ro.realized_rotation.push_back((qb[j] - q0[j]) / ro.T);
  return ro;
}

// max over interior nodes t and sub-intervals [t', t''] of
// |Qdot(t) - (Q(t'') - Q(t'))/(t'' - t')|, Qdot(t) by central differences.
// Chord slopes are weighted means of segment slopes, so their extremes over
// all sub-intervals are the extreme segment slopes.
inline double velocity_deviation(const DiscretePath& path, const std::vector<std::size_t>& coords) {
  require(path.size() >= 3, "velocity_deviation: need >= 3 nodes");
  double dev = 0;
  for (auto j : coords) {
    require(j < path.dim(), "velocity_deviation: coordinate out of range");
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      const double s = (path.nodes[i + 1][j] - path.nodes[i][j]) / path.h(i);
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    for (std::size_t i = 1; i + 1 < path.size(); ++i) {
      const double v = (path.nodes[i + 1][j] - path.nodes[i - 1][j]) / (path.times[i + 1] - path.times[i - 1]);
      dev = std::max({dev, v - lo, hi - v});
    }
  }
  return dev;
}

}  // namespace lagtorus
