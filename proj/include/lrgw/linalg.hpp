#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "lrgw/errors.hpp"
#include "lrgw/matrix.hpp"

namespace lrgw {

// ---------------------------------------------------------------------------
// Householder QR with greedy column pivoting.
// ---------------------------------------------------------------------------

struct QrcpResult {
  Matrix q;               // m x k, orthonormal columns, k = min(m, n)
  Matrix r;               // k x n, upper triangular (row i zero below diag)
  std::vector<int> perm;  // columns of A in selection order, length n
};

// Greedy QRCP: at each step the remaining column of largest residual norm is
// eliminated next. Ties break to the lowest column index so results are
// reproducible. Rank-deficient inputs are fine; trailing R diagonal ~ 0.
inline QrcpResult qrcp(const Matrix& a_in) {
  const int m = a_in.rows(), n = a_in.cols();
  if (m < 1 || n < 1) throw invalid_input("qrcp: empty matrix");
  const int k = std::min(m, n);

  Matrix a = a_in;
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);

  std::vector<double> cnorm(n), cnorm_orig(n);
  for (int j = 0; j < n; ++j) {
    const double* cj = a.col(j);
    double s = 0.0;
    for (int i = 0; i < m; ++i) s += cj[i] * cj[i];
    cnorm[j] = cnorm_orig[j] = s;
  }

  std::vector<double> tau(k, 0.0);
  for (int step = 0; step < k; ++step) {
    int p = step;
    for (int j = step + 1; j < n; ++j)
      if (cnorm[j] > cnorm[p]) p = j;
    if (p != step) {
      for (int i = 0; i < m; ++i) std::swap(a(i, step), a(i, p));
      std::swap(perm[step], perm[p]);
      std::swap(cnorm[step], cnorm[p]);
      std::swap(cnorm_orig[step], cnorm_orig[p]);
    }

    // Householder vector for a(step:m, step), stored below the diagonal with
    // implicit leading 1.
    double alpha = 0.0;
    for (int i = step; i < m; ++i) alpha += a(i, step) * a(i, step);
    alpha = std::sqrt(alpha);
    if (alpha == 0.0) {
      tau[step] = 0.0;
    } else {
      if (a(step, step) > 0.0) alpha = -alpha;
      double v0 = a(step, step) - alpha;
      for (int i = step + 1; i < m; ++i) a(i, step) /= v0;
      tau[step] = -v0 / alpha;  // = (alpha - a_kk_old) / alpha, in (0, 2]
      a(step, step) = alpha;

      // Apply I - tau v v^T to trailing columns.
      for (int j = step + 1; j < n; ++j) {
        double s = a(step, j);
        for (int i = step + 1; i < m; ++i) s += a(i, step) * a(i, j);
        s *= tau[step];
        a(step, j) -= s;
        for (int i = step + 1; i < m; ++i) a(i, j) -= s * a(i, step);
      }
    }

    // Downdate residual column norms; recompute when cancellation bites.
    for (int j = step + 1; j < n; ++j) {
      double t = a(step, j);
      cnorm[j] -= t * t;
      if (cnorm[j] < 1e-12 * cnorm_orig[j] || cnorm[j] < 0.0) {
        double s = 0.0;
        for (int i = step + 1; i < m; ++i) s += a(i, j) * a(i, j);
        cnorm[j] = s;
      }
    }
  }

  QrcpResult out;
  out.perm = std::move(perm);
  out.r = Matrix(k, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i <= std::min(j, k - 1); ++i) out.r(i, j) = a(i, j);

  // Accumulate Q = H_0 H_1 ... H_{k-1} applied to the first k identity cols.
  out.q = Matrix(m, k);
  for (int j = 0; j < k; ++j) out.q(j, j) = 1.0;
  for (int step = k - 1; step >= 0; --step) {
    if (tau[step] == 0.0) continue;
    for (int j = 0; j < k; ++j) {
      double s = out.q(step, j);
      for (int i = step + 1; i < m; ++i) s += a(i, step) * out.q(i, j);
      s *= tau[step];
      out.q(step, j) -= s;
      for (int i = step + 1; i < m; ++i) out.q(i, j) -= s * a(i, step);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// LU with partial pivoting.
// ---------------------------------------------------------------------------

struct LuFactors {
  Matrix lu;              // combined L (unit lower) and U storage
  std::vector<int> piv;   // row swaps applied at each step
  double max_abs_input;   // ||A||_inf scale used for the pivot threshold
};

inline LuFactors lu_factor(const Matrix& a_in) {
  if (a_in.rows() != a_in.cols()) throw invalid_input("lu_factor: not square");
  const int n = a_in.rows();
  LuFactors f{a_in, std::vector<int>(n), max_abs(a_in)};
  Matrix& a = f.lu;
  const double tiny = 1e-14 * (f.max_abs_input > 0.0 ? f.max_abs_input : 1.0);

  for (int k = 0; k < n; ++k) {
    int p = k;
    for (int i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(p, k))) p = i;
    f.piv[k] = p;
    if (p != k)
      for (int j = 0; j < n; ++j) std::swap(a(k, j), a(p, j));
    if (std::abs(a(k, k)) < tiny)
      throw singular_matrix("lu_factor: singular matrix", k);
    const double inv = 1.0 / a(k, k);
    for (int i = k + 1; i < n; ++i) a(i, k) *= inv;
    for (int j = k + 1; j < n; ++j) {
      const double akj = a(k, j);
      if (akj == 0.0) continue;
      double* cj = a.col(j);
      const double* ck = a.col(k);
      for (int i = k + 1; i < n; ++i) cj[i] -= ck[i] * akj;
    }
  }
  return f;
}

inline Matrix lu_solve_factored(const LuFactors& f, const Matrix& b_in) {
  const int n = f.lu.rows();
  if (b_in.rows() != n) throw invalid_input("lu_solve: rhs row mismatch");
  Matrix x = b_in;
  for (int j = 0; j < x.cols(); ++j) {
    double* xj = x.col(j);
    for (int k = 0; k < n; ++k)
      if (f.piv[k] != k) std::swap(xj[k], xj[f.piv[k]]);
    for (int k = 0; k < n; ++k) {  // L y = Pb (unit lower)
      const double xk = xj[k];
      if (xk == 0.0) continue;
      const double* ck = f.lu.col(k);
      for (int i = k + 1; i < n; ++i) xj[i] -= ck[i] * xk;
    }
    for (int k = n - 1; k >= 0; --k) {  // U x = y
      xj[k] /= f.lu(k, k);
      const double xk = xj[k];
      if (xk == 0.0) continue;
      const double* ck = f.lu.col(k);
      for (int i = 0; i < k; ++i) xj[i] -= ck[i] * xk;
    }
  }
  return x;
}

inline Matrix lu_solve(const Matrix& a, const Matrix& b) {
  return lu_solve_factored(lu_factor(a), b);
}

inline Matrix lu_invert(const Matrix& a) {
  return lu_solve(a, Matrix::identity(a.rows()));
}

// ---------------------------------------------------------------------------
// Symmetric eigensolver: Householder tridiagonalization + implicit QL.
// Values come back ascending; vectors orthonormal in the columns of q.
// ---------------------------------------------------------------------------

struct SymEigResult {
  std::vector<double> values;  // ascending
  Matrix q;                    // columns are eigenvectors
};

namespace detail {

inline void tred2(Matrix& z, std::vector<double>& d, std::vector<double>& e) {
  const int n = z.rows();
  for (int i = n - 1; i > 0; --i) {
    const int l = i - 1;
    double h = 0.0, scale = 0.0;
    if (l > 0) {
      for (int k = 0; k <= l; ++k) scale += std::abs(z(i, k));
      if (scale == 0.0) {
        e[i] = z(i, l);
      } else {
        for (int k = 0; k <= l; ++k) {
          z(i, k) /= scale;
          h += z(i, k) * z(i, k);
        }
        double f = z(i, l);
        double g = (f >= 0.0) ? -std::sqrt(h) : std::sqrt(h);
        e[i] = scale * g;
        h -= f * g;
        z(i, l) = f - g;
        f = 0.0;
        for (int j = 0; j <= l; ++j) {
          z(j, i) = z(i, j) / h;
          g = 0.0;
          for (int k = 0; k <= j; ++k) g += z(j, k) * z(i, k);
          for (int k = j + 1; k <= l; ++k) g += z(k, j) * z(i, k);
          e[j] = g / h;
          f += e[j] * z(i, j);
        }
        const double hh = f / (h + h);
        for (int j = 0; j <= l; ++j) {
          f = z(i, j);
          e[j] = g = e[j] - hh * f;
          for (int k = 0; k <= j; ++k) z(j, k) -= f * e[k] + g * z(i, k);
        }
      }
    } else {
      e[i] = z(i, l);
    }
    d[i] = h;
  }
  d[0] = 0.0;
  e[0] = 0.0;
  for (int i = 0; i < n; ++i) {
    const int l = i - 1;
    if (d[i] != 0.0) {
      for (int j = 0; j <= l; ++j) {
        double g = 0.0;
        for (int k = 0; k <= l; ++k) g += z(i, k) * z(k, j);
        for (int k = 0; k <= l; ++k) z(k, j) -= g * z(k, i);
      }
    }
    d[i] = z(i, i);
    z(i, i) = 1.0;
    for (int j = 0; j <= l; ++j) z(j, i) = z(i, j) = 0.0;
  }
}

inline void tql2(std::vector<double>& d, std::vector<double>& e, Matrix& z) {
  const int n = static_cast<int>(d.size());
  auto hyp = [](double a, double b) { return std::hypot(a, b); };
  for (int i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;
  for (int l = 0; l < n; ++l) {
    int iter = 0;
    int m;
    do {
      for (m = l; m < n - 1; ++m) {
        double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) <= 1e-300 || std::abs(e[m]) <= 2.3e-16 * dd) break;
      }
      if (m != l) {
        if (++iter == 60)
          throw numeric_error("sym_eig: QL iteration did not converge");
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = hyp(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + (g >= 0.0 ? std::abs(r) : -std::abs(r)));
        double s = 1.0, c = 1.0, p = 0.0;
        for (int i = m - 1; i >= l; --i) {
          double f = s * e[i];
          double b = c * e[i];
          r = hyp(f, g);
          e[i + 1] = r;
          if (r == 0.0) {
            d[i + 1] -= p;
            e[m] = 0.0;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          p = s * r;
          d[i + 1] = g + p;
          g = c * r - b;
          for (int k = 0; k < n; ++k) {
            f = z(k, i + 1);
            z(k, i + 1) = s * z(k, i) + c * f;
            z(k, i) = c * z(k, i) - s * f;
          }
        }
        if (r == 0.0 && e[l] == 0.0 && m - 1 >= l) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }
}

}  // namespace detail

// Symmetrizes internally; refuses matrices whose symmetry defect exceeds
// 1e-8 * ||A||_F since those are caller bugs, not roundoff.
inline SymEigResult sym_eig(const Matrix& a_in) {
  if (a_in.rows() != a_in.cols()) throw invalid_input("sym_eig: not square");
  const int n = a_in.rows();
  if (n == 0) throw invalid_input("sym_eig: empty matrix");
  const double fa = frobenius_norm(a_in);
  if (symmetry_defect(a_in) > 1e-8 * std::max(fa, 1e-300))
    throw invalid_input("sym_eig: matrix is not symmetric");

  SymEigResult out;
  out.q = a_in;
  symmetrize(out.q);
  out.values.assign(n, 0.0);
  std::vector<double> e(n, 0.0);
  if (n == 1) {
    out.values[0] = a_in(0, 0);
    out.q(0, 0) = 1.0;
    return out;
  }
  detail::tred2(out.q, out.values, e);
  detail::tql2(out.values, e, out.q);

  // Ascending order with matching eigenvector columns.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int i, int j) { return out.values[i] < out.values[j]; });
  std::vector<double> dv(n);
  Matrix qs(n, n);
  for (int j = 0; j < n; ++j) {
    dv[j] = out.values[order[j]];
    for (int i = 0; i < n; ++i) qs(i, j) = out.q(i, order[j]);
  }
  out.values = std::move(dv);
  out.q = std::move(qs);
  return out;
}

// Spectral norm of a symmetric matrix.
inline double sym_norm2(const Matrix& a) {
  SymEigResult ev = sym_eig(a);
  return std::max(std::abs(ev.values.front()), std::abs(ev.values.back()));
}

}  // namespace lrgw
