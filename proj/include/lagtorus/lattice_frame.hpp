#pragma once

// Orthogonal integer frames K = (k, k', l_3, ..., l_d) and the block map
// Phi = diag(K, K^{-T}), all checked in exact arithmetic.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "lagtorus/common.hpp"
#include "lagtorus/diophantine.hpp"

namespace lagtorus {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;
using IMatrix = std::vector<IVec>;
using QMatrix = std::vector<std::vector<Rational>>;

// Band widths for |k'|/|k| and |<k',omega>|/|k|.
inline constexpr double kFrameBand = 4.0;
inline constexpr double kAlignBand = 8.0;
// Half-opening of the admissible sector around the projected omega.
inline constexpr double kSectorHalfAngle = kPi / 3.0;

struct LatticeFrame {
  IMatrix rows;
  double k_inner_omega = 0;
  double kprime_inner_omega = 0;

  std::size_t dim() const { return rows.size(); }
  const IVec& k() const { return rows.at(0); }
  const IVec& kprime() const { return rows.at(1); }
};

struct SymplecticBlock {
  IMatrix K;
  QMatrix K_inv_T;
};

inline std::string to_string(const Rational& q) {
  using boost::multiprecision::denominator;
  using boost::multiprecision::numerator;
  if (denominator(q) == 1) return numerator(q).str();
  return numerator(q).str() + "/" + denominator(q).str();
}

// Bareiss fraction-free elimination.
inline BigInt determinant(const IMatrix& K) {
  const std::size_t n = K.size();
  std::vector<std::vector<BigInt>> a(n, std::vector<BigInt>(n));
  for (std::size_t i = 0; i < n; ++i) {
    require(K[i].size() == n, "determinant: matrix must be square");
    for (std::size_t j = 0; j < n; ++j) a[i][j] = K[i][j];
  }
  BigInt sign = 1, prev = 1;
  for (std::size_t p = 0; p < n; ++p) {
    if (a[p][p] == 0) {
      std::size_t r = p + 1;
      while (r < n && a[r][p] == 0) ++r;
      if (r == n) return 0;
      std::swap(a[p], a[r]);
      sign = -sign;
    }
    for (std::size_t i = p + 1; i < n; ++i)
      for (std::size_t j = p + 1; j < n; ++j)
        a[i][j] = (a[i][j] * a[p][p] - a[i][p] * a[p][j]) / prev;
    prev = a[p][p];
  }
  return sign * a[n - 1][n - 1];
}

inline QMatrix rational_inverse(const IMatrix& K) {
  const std::size_t n = K.size();
  QMatrix a(n, std::vector<Rational>(2 * n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) a[i][j] = K[i][j];
    a[i][n + i] = 1;
  }
  for (std::size_t p = 0; p < n; ++p) {
    std::size_t r = p;
    while (r < n && a[r][p] == 0) ++r;
    if (r == n) throw PreconditionError("rational_inverse: singular matrix");
    std::swap(a[p], a[r]);
    const Rational piv = a[p][p];
    for (auto& x : a[p]) x /= piv;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == p || a[i][p] == 0) continue;
      const Rational f = a[i][p];
      for (std::size_t j = 0; j < 2 * n; ++j) a[i][j] -= f * a[p][j];
    }
  }
  QMatrix inv(n, std::vector<Rational>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) inv[i][j] = a[i][n + j];
  return inv;
}

namespace detail {

inline IVec reduce_by_gcd(IVec v) {
  const auto g = gcd_of(v);
  if (g > 1)
    for (auto& x : v) x /= g;
  return v;
}

inline std::array<std::int64_t, 3> cross3(const IVec& a, const IVec& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

// Integer vectors orthogonal to all of `given`, completing it to an
// orthogonal basis; exact Gram-Schmidt over the standard basis.
inline IMatrix orthogonal_completion(const IMatrix& given, std::size_t d) {
  std::vector<std::vector<Rational>> basis;
  for (const auto& g : given) basis.emplace_back(g.begin(), g.end());
  IMatrix out;
  for (std::size_t e = 0; e < d && basis.size() < d; ++e) {
    std::vector<Rational> v(d, 0);
    v[e] = 1;
    for (const auto& b : basis) {
      Rational vb = 0, bb = 0;
      for (std::size_t i = 0; i < d; ++i) {
        vb += v[i] * b[i];
        bb += b[i] * b[i];
      }
      const Rational f = vb / bb;
      for (std::size_t i = 0; i < d; ++i) v[i] -= f * b[i];
    }
    if (std::all_of(v.begin(), v.end(), [](const Rational& x) { return x == 0; })) continue;
    BigInt l = 1;
    for (const auto& x : v) l = boost::multiprecision::lcm(l, boost::multiprecision::denominator(x));
    IVec iv(d);
    for (std::size_t i = 0; i < d; ++i)
      iv[i] = static_cast<std::int64_t>(boost::multiprecision::numerator(Rational(v[i] * l)));
    iv = reduce_by_gcd(iv);
    basis.emplace_back(iv.begin(), iv.end());
    out.push_back(iv);
  }
  return out;
}

}  // namespace detail

// Integer k' orthogonal to k with |k'| ~ |k| and |<k',omega>| ~ |k|.
//
// d = 2: the quarter turn of k, signed so that <k',omega> > 0.
// d >= 3: lattice points of the plane {m in Z^3 : <k_{1..3}, m> = 0},
// enumerated as integer combinations of two plane generators within radius
// kFrameBand*|k|, restricted to a sector around the projected omega; the
// shortest qualifier wins, ties broken lexicographically. Entries beyond the
// third are zero.
inline IVec orthogonal_companion(const IVec& k, const RotationVector& w) {
  w.validate();
  const std::size_t d = k.size();
  require(d == w.dim(), "orthogonal_companion: dimension mismatch");
  require(gcd_of(k) == 1, "orthogonal_companion: k must be indivisible");
  const double nk = inorm(k);

  if (d == 2) {
    IVec kp{-k[1], k[0]};
    if (mixed_dot(kp, w.coords) < 0) kp = {k[1], -k[0]};
    return kp;
  }

  // Permute the three leading coordinates so that nonzero k entries come first.
  std::array<std::size_t, 3> perm{0, 1, 2};
  std::stable_partition(perm.begin(), perm.end(), [&](std::size_t i) { return k[i] != 0; });
  const IVec a{k[perm[0]], k[perm[1]], k[perm[2]]};
  const Vec wa{w[perm[0]], w[perm[1]], w[perm[2]]};
  const int nonzero = static_cast<int>((a[0] != 0) + (a[1] != 0) + (a[2] != 0));

  IVec g1, g2;
  if (nonzero <= 1) {
    g1 = {0, 1, 0};
    g2 = {0, 0, 1};
  } else {
    g1 = detail::reduce_by_gcd({-a[1], a[0], 0});
    g2 = detail::reduce_by_gcd({0, -a[2], a[1]});
  }
  require(idot(a, g1) == 0 && idot(a, g2) == 0, "plane generators not orthogonal");

  // Projection of omega onto the plane orthogonal to k (first three coords).
  const double a2 = static_cast<double>(idot(a, a));
  const double wk = a2 > 0 ? mixed_dot(a, wa) / a2 : 0.0;
  const Vec proj{wa[0] - wk * a[0], wa[1] - wk * a[1], wa[2] - wk * a[2]};
  const double nproj = norm(proj);
  require(nproj > 0, "orthogonal_companion: omega is parallel to k in the leading coordinates");

  const double radius = kFrameBand * nk;
  const auto c = detail::cross3(g1, g2);
  const double area = std::sqrt(static_cast<double>(c[0] * c[0] + c[1] * c[1] + c[2] * c[2]));
  const auto amax = static_cast<std::int64_t>(std::ceil(radius * inorm(g2) / area));
  const auto bmax = static_cast<std::int64_t>(std::ceil(radius * inorm(g1) / area));
  const double cos_sector = std::cos(kSectorHalfAngle);

  IVec best;
  std::int64_t best_sq = -1;
  for (std::int64_t al = -amax; al <= amax; ++al) {
    for (std::int64_t be = -bmax; be <= bmax; ++be) {
      IVec m{al * g1[0] + be * g2[0], al * g1[1] + be * g2[1], al * g1[2] + be * g2[2]};
      const auto sq = idot(m, m);
      if (sq == 0) continue;
      const double nm = std::sqrt(static_cast<double>(sq));
      if (nm > radius || nm < nk / kFrameBand) continue;
      const double align = mixed_dot(m, proj);
      if (align < cos_sector * nm * nproj) continue;
      const double mw = mixed_dot(m, wa);
      if (std::abs(mw) < nk / kAlignBand || std::abs(mw) > kAlignBand * nk) continue;
      // Lexicographic tie-break in the original coordinate order.
      IVec full(d, 0);
      for (std::size_t i = 0; i < 3; ++i) full[perm[i]] = m[i];
      if (best_sq < 0 || sq < best_sq || (sq == best_sq && detail::lex_less(full, best))) {
        best_sq = sq;
        best = full;
      }
    }
  }
  if (best_sq < 0)
    throw NonConvergenceError("orthogonal_companion: sector search exhausted for k = (" +
                              join(k) + "); enlarge the frame band");
  return best;
}

inline LatticeFrame complete_frame(const IVec& k, const IVec& kp, const RotationVector& w) {
  const std::size_t d = k.size();
  require(d >= 2 && kp.size() == d, "complete_frame: dimension mismatch");
  require(idot(k, kp) == 0, "complete_frame: k and k' are not orthogonal");
  LatticeFrame f;
  f.rows = {k, kp};
  const bool leading3 =
      d >= 3 && std::all_of(k.begin() + 3, k.end(), [](auto v) { return v == 0; }) &&
      std::all_of(kp.begin() + 3, kp.end(), [](auto v) { return v == 0; });
  if (leading3) {
    const auto c = detail::cross3(k, kp);
    IVec row(d, 0);
    std::copy(c.begin(), c.end(), row.begin());
    f.rows.push_back(row);
    for (std::size_t i = 3; i < d; ++i) {
      IVec e(d, 0);
      e[i] = 1;
      f.rows.push_back(e);
    }
  } else if (d >= 3) {
    for (auto& r : detail::orthogonal_completion(f.rows, d)) f.rows.push_back(r);
  }
  require(f.rows.size() == d, "complete_frame: could not complete the frame");
  require(determinant(f.rows) != 0, "complete_frame: singular frame");
  if (w.dim() == d) {
    f.k_inner_omega = mixed_dot(k, w.coords);
    f.kprime_inner_omega = mixed_dot(kp, w.coords);
  }
  return f;
}

inline LatticeFrame complete_frame(const IVec& k, const IVec& kp) {
  return complete_frame(k, kp, RotationVector{});
}

inline LatticeFrame build_frame(const IVec& k, const RotationVector& w) {
  return complete_frame(k, orthogonal_companion(k, w), w);
}

inline bool rows_orthogonal(const LatticeFrame& f) {
  for (std::size_t i = 0; i < f.dim(); ++i)
    for (std::size_t j = i + 1; j < f.dim(); ++j)
      if (idot(f.rows[i], f.rows[j]) != 0) return false;
  return true;
}

inline SymplecticBlock build_symplectic(const LatticeFrame& f) {
  const auto det = determinant(f.rows);
  if (det == 0) throw PreconditionError("build_symplectic: singular K (det = 0)");
  const auto inv = rational_inverse(f.rows);
  const std::size_t n = f.dim();
  SymplecticBlock b;
  b.K = f.rows;
  b.K_inv_T.assign(n, std::vector<Rational>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) b.K_inv_T[i][j] = inv[j][i];
  return b;
}

// Full 2d x 2d matrix Phi = diag(K, K^{-T}).
inline QMatrix phi_matrix(const SymplecticBlock& b) {
  const std::size_t n = b.K.size();
  QMatrix phi(2 * n, std::vector<Rational>(2 * n, 0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      phi[i][j] = b.K[i][j];
      phi[n + i][n + j] = b.K_inv_T[i][j];
    }
  return phi;
}

inline QMatrix standard_symplectic(std::size_t n) {
  QMatrix J(2 * n, std::vector<Rational>(2 * n, 0));
  for (std::size_t i = 0; i < n; ++i) {
    J[i][n + i] = 1;
    J[n + i][i] = -1;
  }
  return J;
}

inline QMatrix multiply(const QMatrix& A, const QMatrix& B) {
  const std::size_t n = A.size(), m = B.front().size(), l = B.size();
  QMatrix C(n, std::vector<Rational>(m, 0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < l; ++k) {
      if (A[i][k] == 0) continue;
      for (std::size_t j = 0; j < m; ++j) C[i][j] += A[i][k] * B[k][j];
    }
  return C;
}

inline QMatrix transpose(const QMatrix& A) {
  QMatrix T(A.front().size(), std::vector<Rational>(A.size()));
  for (std::size_t i = 0; i < A.size(); ++i)
    for (std::size_t j = 0; j < A[i].size(); ++j) T[j][i] = A[i][j];
  return T;
}

// Phi^T J0 Phi - J0, exactly.
inline QMatrix symplectic_defect(const SymplecticBlock& b) {
  const auto phi = phi_matrix(b);
  const auto J = standard_symplectic(b.K.size());
  auto D = multiply(multiply(transpose(phi), J), phi);
  for (std::size_t i = 0; i < D.size(); ++i)
    for (std::size_t j = 0; j < D.size(); ++j) D[i][j] -= J[i][j];
  return D;
}

inline bool is_symplectic(const SymplecticBlock& b) {
  for (const auto& row : symplectic_defect(b))
    for (const auto& x : row)
      if (x != 0) return false;
  return true;
}

inline RotationVector push_rotation(const LatticeFrame& f, const RotationVector& w) {
  require(f.dim() == w.dim(), "push_rotation: dimension mismatch");
  Vec out(f.dim());
  for (std::size_t i = 0; i < f.dim(); ++i) out[i] = mixed_dot(f.rows[i], w.coords);
  return RotationVector(out);
}

}  // namespace lagtorus
