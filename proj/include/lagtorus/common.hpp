#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lagtorus {

using Vec = std::vector<double>;
using IVec = std::vector<std::int64_t>;

// Numeric values double as CLI exit codes.
enum class ErrorCode : int {
  config = 2,
  nonconvergence = 3,
  precondition = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct PreconditionError : Error {
  explicit PreconditionError(const std::string& what)
      : Error(ErrorCode::precondition, what) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorCode::config, what) {}
};

struct NonConvergenceError : Error {
  explicit NonConvergenceError(const std::string& what)
      : Error(ErrorCode::nonconvergence, what) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw PreconditionError(msg);
}

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr double kGolden = 1.61803398874989484820;

inline double dot(const Vec& a, const Vec& b) {
  require(a.size() == b.size(), "dimension mismatch in dot product");
  long double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * b[i];
  return static_cast<double>(s);
}

inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

inline std::int64_t idot(const IVec& a, const IVec& b) {
  require(a.size() == b.size(), "dimension mismatch in integer dot product");
  std::int64_t s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double inorm(const IVec& k) {
  return std::sqrt(static_cast<double>(idot(k, k)));
}

// Exact dot product of an integer vector with a real one, accumulated in
// long double.
inline double mixed_dot(const IVec& k, const Vec& w) {
  require(k.size() == w.size(), "dimension mismatch");
  long double s = 0;
  for (std::size_t i = 0; i < k.size(); ++i) s += static_cast<long double>(k[i]) * w[i];
  return static_cast<double>(s);
}

inline std::int64_t gcd_of(const IVec& k) {
  std::int64_t g = 0;
  for (auto v : k) g = std::gcd(g, v < 0 ? -v : v);
  return g;
}

// Periodic reduction to (-pi, pi].
inline double wrap_pi(double x) {
  double r = std::remainder(x, kTwoPi);
  if (r <= -kPi) r += kTwoPi;
  return r;
}

template <typename T>
std::string join(const std::vector<T>& v, const char* sep = ",") {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << sep;
    os << v[i];
  }
  return os.str();
}

// Ordinary least squares y = slope*x + intercept.
struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double r_squared = 0;
};

inline LinearFit fit_line(const Vec& x, const Vec& y) {
  require(x.size() == y.size() && x.size() >= 2, "fit_line needs >= 2 paired samples");
  const double n = static_cast<double>(x.size());
  long double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const long double mx = sx / n, my = sy / n;
  long double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const long double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  require(sxx > 0, "fit_line: degenerate abscissae");
  LinearFit f;
  f.slope = static_cast<double>(sxy / sxx);
  f.intercept = static_cast<double>(my - sxy / sxx * mx);
  f.r_squared = syy > 0 ? static_cast<double>(sxy * sxy / (sxx * syy)) : 1.0;
  return f;
}

}  // namespace lagtorus
