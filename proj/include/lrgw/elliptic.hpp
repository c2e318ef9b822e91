#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "lrgw/errors.hpp"

namespace lrgw {

// ---------------------------------------------------------------------------
// Complete elliptic integral of the first kind via the arithmetic-geometric
// mean: K(k) = pi / (2 * AGM(1, sqrt(1 - k^2))), 0 <= k < 1.
// ---------------------------------------------------------------------------

inline double agm(double a, double b) {
  for (int it = 0; it < 64; ++it) {
    double an = 0.5 * (a + b);
    double bn = std::sqrt(a * b);
    if (std::abs(an - bn) <= 1e-16 * an) return an;
    a = an;
    b = bn;
  }
  return 0.5 * (a + b);
}

inline double elliptic_k(double k) {
  if (!(k >= 0.0 && k < 1.0))
    throw invalid_input("elliptic_k: modulus must be in [0, 1)");
  const double pi = 3.14159265358979323846;
  return pi / (2.0 * agm(1.0, std::sqrt((1.0 - k) * (1.0 + k))));
}

// ---------------------------------------------------------------------------
// Jacobi elliptic functions sn, cn, dn for real argument, modulus k in [0, 1).
// Descending Landen recursion on function values (the sncndn scheme): run the
// AGM scale sequence forward, evaluate circular functions of the rescaled
// argument, then back-substitute. Unlike the amplitude (asin) recursion this
// stays well conditioned at quarter-period arguments, which the contour
// endpoints hit exactly.
// ---------------------------------------------------------------------------

struct JacobiTriple {
  double sn, cn, dn;
};

inline JacobiTriple jacobi_sn_cn_dn(double u, double k) {
  if (!(k >= 0.0 && k < 1.0))
    throw invalid_input("jacobi_sn_cn_dn: modulus must be in [0, 1)");
  if (k < 1e-14) return {std::sin(u), std::cos(u), 1.0};

  double em[24], en[24];
  double a = 1.0;
  double emc = (1.0 - k) * (1.0 + k);  // complementary parameter k'^2
  double c = 0.0;
  int l = 0;
  for (int i = 0; i < 24; ++i) {
    l = i;
    em[i] = a;
    emc = std::sqrt(emc);
    en[i] = emc;
    c = 0.5 * (a + emc);
    if (std::abs(a - emc) <= 1e-16 * a) break;
    emc *= a;
    a = c;
  }
  double uc = u * c;
  double sn = std::sin(uc), cn = std::cos(uc), dn = 1.0;
  if (sn != 0.0) {
    a = cn / sn;
    c *= a;
    for (int i = l; i >= 0; --i) {
      const double b = em[i];
      a *= c;
      c *= dn;
      dn = (en[i] + a) / (b + a);
      a = c / b;
    }
    a = 1.0 / std::sqrt(c * c + 1.0);
    sn = (sn >= 0.0) ? a : -a;
    cn = c * sn;
  }
  return {sn, cn, dn};
}

// ---------------------------------------------------------------------------
// Jacobi elliptic functions for complex argument x + i*y via the real
// addition formulas (A&S 16.21), valid for |y| < K(k') where k' is the
// complementary modulus.
// ---------------------------------------------------------------------------

struct JacobiComplexTriple {
  std::complex<double> sn, cn, dn;
};

inline JacobiComplexTriple jacobi_complex(std::complex<double> u, double k) {
  if (!(k >= 0.0 && k < 1.0))
    throw invalid_input("jacobi_complex: modulus must be in [0, 1)");
  const double x = u.real(), y = u.imag();
  const double kp = std::sqrt((1.0 - k) * (1.0 + k));
  if (std::abs(y) >= elliptic_k(kp))
    throw invalid_input(
        "jacobi_complex: imaginary part outside the fundamental rectangle");
  JacobiTriple re = jacobi_sn_cn_dn(x, k);
  JacobiTriple im = jacobi_sn_cn_dn(y, kp);
  const double denom =
      im.cn * im.cn + k * k * re.sn * re.sn * im.sn * im.sn;
  if (std::abs(denom) < 1e-13)
    throw numeric_error("jacobi_complex: argument too close to a pole");
  const std::complex<double> i_unit(0.0, 1.0);
  JacobiComplexTriple t;
  t.sn = (re.sn * im.dn + i_unit * (re.cn * re.dn * im.sn * im.cn)) / denom;
  t.cn = (re.cn * im.cn - i_unit * (re.sn * re.dn * im.sn * im.dn)) / denom;
  t.dn = (re.dn * im.cn * im.dn - i_unit * (k * k * re.sn * re.cn * im.sn)) /
         denom;
  return t;
}

// ---------------------------------------------------------------------------
// Adaptive Gauss-Legendre quadrature. Nodes/weights are generated at run
// time by Newton iteration on the Legendre recurrence; intervals are
// bisected until the 15-point rule is locally converged.
// ---------------------------------------------------------------------------

namespace detail {

struct GaussRule {
  std::vector<double> x;  // nodes on [-1, 1]
  std::vector<double> w;
};

inline GaussRule gauss_legendre_rule(int n) {
  GaussRule r;
  r.x.resize(n);
  r.w.resize(n);
  const double pi = 3.14159265358979323846;
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1);
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) < 1e-15) break;
    }
    r.x[i] = -z;
    r.x[n - 1 - i] = z;
    r.w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    r.w[n - 1 - i] = r.w[i];
  }
  return r;
}

inline double gauss_apply(const GaussRule& r,
                          const std::function<double(double)>& f, double a,
                          double b) {
  const double xm = 0.5 * (b + a), xl = 0.5 * (b - a);
  double s = 0.0;
  for (std::size_t i = 0; i < r.x.size(); ++i)
    s += r.w[i] * f(xm + xl * r.x[i]);
  return s * xl;
}

inline double gauss_adaptive(const GaussRule& r,
                             const std::function<double(double)>& f, double a,
                             double b, double whole, double tol, int depth) {
  const double mid = 0.5 * (a + b);
  const double left = gauss_apply(r, f, a, mid);
  const double right = gauss_apply(r, f, mid, b);
  const double refined = left + right;
  if (std::abs(refined - whole) <= tol * std::max(1.0, std::abs(refined)) ||
      depth >= 48)
    return refined;
  return gauss_adaptive(r, f, a, mid, left, 0.5 * tol, depth + 1) +
         gauss_adaptive(r, f, mid, b, right, 0.5 * tol, depth + 1);
}

}  // namespace detail

inline double integrate_adaptive(const std::function<double(double)>& f,
                                 double a, double b, double rel_tol = 1e-13) {
  static const detail::GaussRule rule = detail::gauss_legendre_rule(15);
  const double whole = detail::gauss_apply(rule, f, a, b);
  return detail::gauss_adaptive(rule, f, a, b, whole, rel_tol, 0);
}

}  // namespace lrgw
