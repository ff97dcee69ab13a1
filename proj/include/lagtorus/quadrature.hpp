#pragma once

// Globally adaptive Gauss-Kronrod (7/15) quadrature.

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <tuple>
#include <sstream>
#include <string>
#include <vector>

#include "lagtorus/common.hpp"

namespace lagtorus {

struct QuadratureResult {
  double value = 0;
  double error = 0;
  int intervals = 0;
};

struct QuadratureOptions {
  double rel_tol = 1e-13;
  double abs_tol = 0;
  int max_intervals = 4000;
};

namespace detail {

inline std::string sci(double x) {
  std::ostringstream os;
  os.precision(6);
  os << std::scientific << x;
  return os.str();
}

inline constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a, b, value, error;
  double absval;  // integral of |f|, sets the rounding floor
  bool operator<(const Segment& o) const { return error < o.error; }
};

template <typename F>
Segment gk15(F& f, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  const double fc = f(c);
  double kron = fc * kWgk[7];
  double gauss = fc * kWg[3];
  double absk = std::abs(fc) * kWgk[7];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kXgk[j];
    const double fl = f(c - dx), fr = f(c + dx);
    const double fsum = fl + fr;
    kron += kWgk[j] * fsum;
    absk += kWgk[j] * (std::abs(fl) + std::abs(fr));
    if (j % 2 == 1) gauss += kWg[j / 2] * fsum;
  }
  return {a, b, kron * h, std::abs((kron - gauss) * h), absk * std::abs(h)};
}

}  // namespace detail

// Integrates f over the partition given by `breaks` (sorted, >= 2 entries),
// always bisecting the segment with the largest error estimate. Throws
// NonConvergenceError when the interval cap is hit.
template <typename F>
QuadratureResult integrate(F&& f, const std::vector<double>& breaks,
                           const QuadratureOptions& opt = {}) {
  require(breaks.size() >= 2, "integrate: need at least one interval");
  std::priority_queue<detail::Segment> heap;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
    if (breaks[i + 1] > breaks[i]) heap.push(detail::gk15(f, breaks[i], breaks[i + 1]));
  auto totals = [&] {
    auto copy = heap;
    long double v = 0, e = 0, a = 0;
    while (!copy.empty()) {
      v += copy.top().value;
      e += copy.top().error;
      a += copy.top().absval;
      copy.pop();
    }
    return std::tuple<double, double, double>(static_cast<double>(v), static_cast<double>(e),
                                              static_cast<double>(a));
  };
  auto [value, error, absval] = totals();
  const double eps = std::numeric_limits<double>::epsilon();
  // Errors below 50 eps * int |f| are rounding noise and cannot be reduced.
  while (error > std::max({opt.abs_tol, opt.rel_tol * std::abs(value), 50 * eps * absval})) {
    if (static_cast<int>(heap.size()) >= opt.max_intervals)
      throw NonConvergenceError("integrate: subdivision cap reached (error " + detail::sci(error) +
                                ", value " + detail::sci(value) + " on [" + detail::sci(breaks.front()) + ", " +
                                detail::sci(breaks.back()) + "])");
    const auto worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      // Cannot split further; keep the segment and accept its estimate.
      heap.push({worst.a, worst.b, worst.value, 0.0, worst.absval});
    } else {
      auto l = detail::gk15(f, worst.a, mid);
      auto r = detail::gk15(f, mid, worst.b);
      value += l.value + r.value - worst.value;
      error += l.error + r.error - worst.error;
      absval += l.absval + r.absval - worst.absval;
      heap.push(l);
      heap.push(r);
    }
    if (heap.size() % 64 == 0) std::tie(value, error, absval) = totals();
  }
  std::tie(value, error, absval) = totals();
  return {value, error, static_cast<int>(heap.size())};
}

template <typename F>
QuadratureResult integrate(F&& f, double a, double b, const QuadratureOptions& opt = {}) {
  return integrate(std::forward<F>(f), std::vector<double>{a, b}, opt);
}

}  // namespace lagtorus
