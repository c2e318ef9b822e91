#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "lrgw/errors.hpp"
#include "lrgw/rng.hpp"

namespace lrgw {

// Dense real matrix, column-major, double precision. Sized for desk-scale
// dense algebra (n up to a few thousand); no view machinery, just values.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols) : rows_(rows), cols_(cols) {
    if (rows < 0 || cols < 0) throw invalid_input("Matrix: negative dimension");
    a_.assign(static_cast<std::size_t>(rows) * cols, 0.0);
  }

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix gaussian(int rows, int cols, Rng& rng) {
    Matrix m(rows, cols);
    for (double& v : m.a_) v = rng.gaussian();
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool empty() const { return a_.empty(); }

  double& operator()(int i, int j) {
    return a_[static_cast<std::size_t>(j) * rows_ + i];
  }
  double operator()(int i, int j) const {
    return a_[static_cast<std::size_t>(j) * rows_ + i];
  }

  double* col(int j) { return a_.data() + static_cast<std::size_t>(j) * rows_; }
  const double* col(int j) const {
    return a_.data() + static_cast<std::size_t>(j) * rows_;
  }
  double* data() { return a_.data(); }
  const double* data() const { return a_.data(); }
  std::size_t size() const { return a_.size(); }

  bool operator==(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && a_ == o.a_;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> a_;
};

inline void check_same_shape(const Matrix& a, const Matrix& b,
                             const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw invalid_input(std::string(what) + ": shape mismatch");
}

// C = A * B
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw invalid_input("matmul: inner dim mismatch");
  Matrix c(a.rows(), b.cols());
  const int m = a.rows(), k = a.cols(), n = b.cols();
  for (int j = 0; j < n; ++j) {
    double* cj = c.col(j);
    for (int l = 0; l < k; ++l) {
      const double blj = b(l, j);
      if (blj == 0.0) continue;
      const double* al = a.col(l);
      for (int i = 0; i < m; ++i) cj[i] += al[i] * blj;
    }
  }
  return c;
}

// C = A^T * B
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw invalid_input("matmul_tn: dim mismatch");
  Matrix c(a.cols(), b.cols());
  const int m = a.rows();
  for (int j = 0; j < b.cols(); ++j) {
    const double* bj = b.col(j);
    for (int i = 0; i < a.cols(); ++i) {
      const double* ai = a.col(i);
      double s = 0.0;
      for (int l = 0; l < m; ++l) s += ai[l] * bj[l];
      c(i, j) = s;
    }
  }
  return c;
}

// C = A * B^T
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw invalid_input("matmul_nt: dim mismatch");
  Matrix c(a.rows(), b.rows());
  const int m = a.rows(), k = a.cols(), n = b.rows();
  for (int l = 0; l < k; ++l) {
    const double* al = a.col(l);
    const double* bl = b.col(l);
    for (int j = 0; j < n; ++j) {
      const double blj = bl[j];
      if (blj == 0.0) continue;
      double* cj = c.col(j);
      for (int i = 0; i < m; ++i) cj[i] += al[i] * blj;
    }
  }
  return c;
}

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (int j = 0; j < a.cols(); ++j)
    for (int i = 0; i < a.rows(); ++i) t(j, i) = a(i, j);
  return t;
}

inline Matrix operator+(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "operator+");
  Matrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] += b.data()[i];
  return c;
}

inline Matrix operator-(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "operator-");
  Matrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] -= b.data()[i];
  return c;
}

inline Matrix operator*(double s, const Matrix& a) {
  Matrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] *= s;
  return c;
}

inline Matrix hadamard(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "hadamard");
  Matrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] *= b.data()[i];
  return c;
}

// Right-multiplication by diag(d): scales column j by d[j].
inline Matrix scale_cols(const Matrix& a, const std::vector<double>& d) {
  if (static_cast<int>(d.size()) != a.cols())
    throw invalid_input("scale_cols: diagonal length mismatch");
  Matrix c = a;
  for (int j = 0; j < c.cols(); ++j) {
    double* cj = c.col(j);
    for (int i = 0; i < c.rows(); ++i) cj[i] *= d[j];
  }
  return c;
}

inline double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * a.data()[i];
  return std::sqrt(s);
}

inline double max_abs(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s = std::max(s, std::abs(a.data()[i]));
  return s;
}

inline double symmetry_defect(const Matrix& a) {
  if (a.rows() != a.cols()) throw invalid_input("symmetry_defect: not square");
  double s = 0.0;
  for (int j = 0; j < a.cols(); ++j)
    for (int i = 0; i < j; ++i) {
      double d = a(i, j) - a(j, i);
      s += 2.0 * d * d;
    }
  return std::sqrt(s);
}

inline void symmetrize(Matrix& a) {
  if (a.rows() != a.cols()) throw invalid_input("symmetrize: not square");
  for (int j = 0; j < a.cols(); ++j)
    for (int i = 0; i < j; ++i) {
      double v = 0.5 * (a(i, j) + a(j, i));
      a(i, j) = v;
      a(j, i) = v;
    }
}

// Rows of `a` at the given (row-index) positions, in order.
inline Matrix rows_at(const Matrix& a, const std::vector<int>& idx) {
  Matrix r(static_cast<int>(idx.size()), a.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= a.rows())
      throw invalid_input("rows_at: index out of range");
    for (int j = 0; j < a.cols(); ++j)
      r(static_cast<int>(k), j) = a(idx[k], j);
  }
  return r;
}

// Contiguous block of columns [j0, j0+n).
inline Matrix cols_block(const Matrix& a, int j0, int n) {
  if (j0 < 0 || n < 0 || j0 + n > a.cols())
    throw invalid_input("cols_block: range out of bounds");
  Matrix r(a.rows(), n);
  for (int j = 0; j < n; ++j)
    std::copy(a.col(j0 + j), a.col(j0 + j) + a.rows(), r.col(j));
  return r;
}

inline std::vector<double> matvec(const Matrix& a,
                                  const std::vector<double>& x) {
  if (static_cast<int>(x.size()) != a.cols())
    throw invalid_input("matvec: length mismatch");
  std::vector<double> y(a.rows(), 0.0);
  for (int j = 0; j < a.cols(); ++j) {
    const double* aj = a.col(j);
    const double xj = x[j];
    for (int i = 0; i < a.rows(); ++i) y[i] += aj[i] * xj;
  }
  return y;
}

inline double dot(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline double norm2(const std::vector<double>& x) {
  return std::sqrt(dot(x, x));
}

}  // namespace lrgw
