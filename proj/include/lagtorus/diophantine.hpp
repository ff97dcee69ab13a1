#pragma once

// Integer approximants k with small |<omega, k>| and resonance classification.
//
// Everything here is brute-force enumeration over the box |k|_inf <= max_norm;
// the cost is O((2*max_norm+1)^d), which is the intended desk-scale regime.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "lagtorus/common.hpp"

namespace lagtorus {

struct RotationVector {
  Vec coords;

  RotationVector() = default;
  explicit RotationVector(Vec c) : coords(std::move(c)) { validate(); }

  std::size_t dim() const { return coords.size(); }
  double operator[](std::size_t i) const { return coords[i]; }

  void validate() const {
    require(coords.size() >= 2, "rotation vector needs dimension >= 2");
    for (double c : coords) require(std::isfinite(c), "rotation vector entries must be finite");
  }
};

struct Approximant {
  IVec k;
  double residual = 0;  // <omega, k>
  double norm = 0;      // Euclidean |k|
  bool indivisible = false;
  double C = 1.0;

  // C / |k|^(d-1)
  double bound() const {
    return C / std::pow(norm, static_cast<double>(k.size()) - 1.0);
  }
};

struct ResonanceReport {
  bool resonant = false;
  IVec witness;
  double residual = 0;
  int max_norm = 0;
};

class ResonantError : public PreconditionError {
 public:
  ResonantError(IVec witness, const std::string& what)
      : PreconditionError(what), witness_(std::move(witness)) {}
  const IVec& witness() const { return witness_; }

 private:
  IVec witness_;
};

class EmptyApproximantsError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

namespace detail {

// Visits every nonzero k in the box with its first nonzero entry positive,
// so k and -k are seen once.
template <typename F>
void for_each_canonical(std::size_t d, int max_norm, F&& visit) {
  IVec k(d, -max_norm);
  while (true) {
    auto first = std::find_if(k.begin(), k.end(), [](std::int64_t v) { return v != 0; });
    if (first != k.end() && *first > 0) visit(static_cast<const IVec&>(k));
    std::size_t i = 0;
    while (i < d && k[i] == max_norm) k[i++] = -max_norm;
    if (i == d) break;
    ++k[i];
  }
}

// Canonical k in the box with |<omega,k>| <= bound. The coordinate with the
// largest |omega_j| is solved for, so the scan costs O(M^(d-1)) instead of
// O(M^d). Falls back to the full box when omega vanishes.
template <typename F>
void for_each_near(const Vec& w, int max_norm, double bound, F&& visit) {
  const std::size_t d = w.size();
  std::size_t j = 0;
  for (std::size_t i = 1; i < d; ++i)
    if (std::abs(w[i]) > std::abs(w[j])) j = i;
  if (w[j] == 0) {
    for_each_canonical(d, max_norm, visit);
    return;
  }
  const double slack = bound + 1e-12 * (1.0 + max_norm * d * std::abs(w[j]));
  IVec rest(d - 1, -max_norm), k(d);
  while (true) {
    long double partial = 0;
    for (std::size_t i = 0, r = 0; i < d; ++i)
      if (i != j) partial += static_cast<long double>(rest[r++]) * w[i];
    const double lo_m = (-static_cast<double>(partial) - slack) / w[j];
    const double hi_m = (-static_cast<double>(partial) + slack) / w[j];
    const auto lo = std::max<std::int64_t>(-max_norm, static_cast<std::int64_t>(std::ceil(std::min(lo_m, hi_m))));
    const auto hi = std::min<std::int64_t>(max_norm, static_cast<std::int64_t>(std::floor(std::max(lo_m, hi_m))));
    for (std::int64_t m = lo; m <= hi; ++m) {
      for (std::size_t i = 0, r = 0; i < d; ++i) k[i] = i == j ? m : rest[r++];
      auto first = std::find_if(k.begin(), k.end(), [](std::int64_t v) { return v != 0; });
      if (first != k.end() && *first > 0) visit(static_cast<const IVec&>(k));
    }
    std::size_t i = 0;
    while (i < d - 1 && rest[i] == max_norm) rest[i++] = -max_norm;
    if (i == d - 1) break;
    ++rest[i];
  }
}

// Doubles are dyadic rationals, so this decides <omega, k> == 0 exactly.
inline bool exact_zero_dot(const Vec& w, const IVec& k) {
  using boost::multiprecision::cpp_rational;
  cpp_rational s = 0;
  for (std::size_t i = 0; i < k.size(); ++i) s += cpp_rational(w[i]) * k[i];
  return s == 0;
}

inline bool lex_less(const IVec& a, const IVec& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace detail

inline bool is_indivisible(const IVec& k) {
  require(!k.empty(), "is_indivisible: empty vector");
  const auto g = gcd_of(k);
  require(g != 0, "is_indivisible: zero vector");
  return g == 1;
}

// Machine-zero threshold for |<omega,k>| when the inputs are irrational.
inline double resonance_threshold(const RotationVector& w, const IVec& k) {
  return 1e-13 * norm(w.coords) * inorm(k);
}

inline ResonanceReport classify_resonance(const RotationVector& w, int max_norm) {
  w.validate();
  require(max_norm >= 1, "classify_resonance: max_norm must be >= 1");
  ResonanceReport rep;
  rep.max_norm = max_norm;
  std::int64_t best_sq = -1;
  const double wn = norm(w.coords);
  const double bound = 1e-9 * (1.0 + wn * max_norm * std::sqrt(static_cast<double>(w.dim())));
  detail::for_each_near(w.coords, max_norm, bound, [&](const IVec& k) {
    const double r = mixed_dot(k, w.coords);
    if (std::abs(r) > 1e-9 * (1.0 + wn * inorm(k))) return;
    if (!(detail::exact_zero_dot(w.coords, k) || std::abs(r) <= resonance_threshold(w, k)))
      return;
    const auto sq = idot(k, k);
    if (best_sq < 0 || sq < best_sq || (sq == best_sq && detail::lex_less(k, rep.witness))) {
      best_sq = sq;
      rep.witness = k;
      rep.residual = r;
    }
  });
  rep.resonant = best_sq >= 0;
  return rep;
}

// Every indivisible k (canonical sign) with 1 <= |k| <= max_norm and
// |<omega,k>| < C/|k|^(d-1), sorted by |k| then lexicographically.
inline std::vector<Approximant> find_approximants(const RotationVector& w, int max_norm,
                                                  double C = 1.0) {
  w.validate();
  require(max_norm >= 1, "find_approximants: max_norm must be >= 1");
  require(C > 0, "find_approximants: C must be positive");
  const auto res = classify_resonance(w, max_norm);
  if (res.resonant)
    throw ResonantError(res.witness, "rotation vector is resonant, witness k = (" +
                                         join(res.witness) + ")");

  const std::size_t d = w.dim();
  const auto max_sq = static_cast<std::int64_t>(max_norm) * max_norm;
  std::vector<Approximant> out;
  // |k| >= 1, so every approximant has |<omega,k>| < C.
  detail::for_each_near(w.coords, max_norm, C, [&](const IVec& k) {
    const auto sq = idot(k, k);
    if (sq > max_sq) return;
    const double nk = std::sqrt(static_cast<double>(sq));
    const double r = mixed_dot(k, w.coords);
    if (!(std::abs(r) < C / std::pow(nk, static_cast<double>(d) - 1.0))) return;
    if (gcd_of(k) != 1) return;
    out.push_back({k, r, nk, true, C});
  });
  std::sort(out.begin(), out.end(), [](const Approximant& a, const Approximant& b) {
    const auto na = idot(a.k, a.k), nb = idot(b.k, b.k);
    if (na != nb) return na < nb;
    return detail::lex_less(a.k, b.k);
  });
  if (out.empty())
    throw EmptyApproximantsError("no approximant with |k| <= " + std::to_string(max_norm) +
                                 "; enlarge max_norm");
  return out;
}

}  // namespace lagtorus
