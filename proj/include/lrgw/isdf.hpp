#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "lrgw/errors.hpp"
#include "lrgw/linalg.hpp"
#include "lrgw/matrix.hpp"
#include "lrgw/model.hpp"
#include "lrgw/rng.hpp"

namespace lrgw {

// Which orbital sets are paired: occupied x unoccupied, occupied x all,
// all x all.
enum class PairSetLabel { vc, vn, nn };

inline const char* to_string(PairSetLabel l) {
  switch (l) {
    case PairSetLabel::vc: return "vc";
    case PairSetLabel::vn: return "vn";
    default: return "nn";
  }
}

enum class PointSelector { qrcp_direct, qrcp_sketched };

// Separable low-rank factorization M ~= P * C of an orbital-pair matrix,
// where C is M restricted to the interpolation-point rows. Pair (i, j) is
// flattened with i fastest throughout.
struct IsdfDecomposition {
  PairSetLabel label = PairSetLabel::vc;
  double k_mu = 0.0;
  int n_mu = 0;
  std::vector<int> point_indices;  // strictly increasing grid indices
  Matrix p;                        // N_r x N_mu auxiliary basis
};

// Auxiliary-basis size rule N_mu = round(k_mu * sqrt(N1*N2)).
inline int num_aux(double k_mu, int n1, int n2) {
  if (!(k_mu > 0.0)) throw invalid_input("num_aux: k_mu must be > 0");
  return static_cast<int>(
      std::llround(k_mu * std::sqrt(static_cast<double>(n1) * n2)));
}

// Guard for any path that materializes the full pair matrix M.
inline constexpr long long kPairMatrixGuard = 1LL << 26;

// Full pair matrix M (N_r x N1*N2), column (i, j) = psi_a(:,i) .* psi_b(:,j).
inline Matrix pair_matrix(const Matrix& psi_a, const Matrix& psi_b) {
  if (psi_a.rows() != psi_b.rows())
    throw invalid_input("pair_matrix: row mismatch");
  const int n_r = psi_a.rows(), n1 = psi_a.cols(), n2 = psi_b.cols();
  if (static_cast<long long>(n_r) * n1 * n2 > kPairMatrixGuard)
    throw guard_exceeded("pair_matrix: materialization guard exceeded");
  Matrix m(n_r, n1 * n2);
  for (int j = 0; j < n2; ++j) {
    const double* bj = psi_b.col(j);
    for (int i = 0; i < n1; ++i) {
      const double* ai = psi_a.col(i);
      double* mc = m.col(i + n1 * j);
      for (int r = 0; r < n_r; ++r) mc[r] = ai[r] * bj[r];
    }
  }
  return m;
}

// Transposed pair matrix (rows = pairs, columns = grid points), the layout
// QRCP point selection works on.
inline Matrix pair_matrix_transposed(const Matrix& psi_a,
                                     const Matrix& psi_b) {
  if (psi_a.rows() != psi_b.rows())
    throw invalid_input("pair_matrix_transposed: row mismatch");
  const int n_r = psi_a.rows(), n1 = psi_a.cols(), n2 = psi_b.cols();
  if (static_cast<long long>(n_r) * n1 * n2 > kPairMatrixGuard)
    throw guard_exceeded("pair_matrix_transposed: materialization guard exceeded");
  Matrix z(n1 * n2, n_r);
  for (int r = 0; r < n_r; ++r) {
    double* zc = z.col(r);
    for (int j = 0; j < n2; ++j) {
      const double bj = psi_b(r, j);
      for (int i = 0; i < n1; ++i) zc[i + n1 * j] = psi_a(r, i) * bj;
    }
  }
  return z;
}

// Interpolation points by rank-revealing QR on the pair matrix: the first
// N_mu pivot columns are the selected grid points, returned sorted. The
// sketched variant compresses the pair rows with a seeded Gaussian sketch
// of 2*N_mu rows first; the sketch seed is fixed so results are
// reproducible for identical inputs.
inline std::vector<int> select_interpolation_points(
    const Matrix& psi_a, const Matrix& psi_b, int n_mu,
    PointSelector method = PointSelector::qrcp_direct) {
  const int n_r = psi_a.rows();
  if (n_mu > n_r)
    throw invalid_input("select_interpolation_points: N_mu > N_r");
  if (n_mu < 1) throw invalid_input("select_interpolation_points: N_mu < 1");
  Matrix z = pair_matrix_transposed(psi_a, psi_b);
  if (method == PointSelector::qrcp_sketched && 2 * n_mu < z.rows()) {
    Rng rng(0x15dfu);
    Matrix g = Matrix::gaussian(2 * n_mu, z.rows(), rng);
    z = matmul(g, z);
  }
  QrcpResult f = qrcp(z);
  std::vector<int> pts(f.perm.begin(), f.perm.begin() + n_mu);
  std::sort(pts.begin(), pts.end());
  return pts;
}

// Least-squares fit of the auxiliary basis: P = (A .* B) (A_mu .* B_mu)^{-1}
// with A = psi_a psi_a_mu^T and B = psi_b psi_b_mu^T. These are the normal
// equations of min ||M - P C||_F in Hadamard form; M itself is never built.
// A singular Gram matrix falls back to a truncated-eigenvalue pseudo-inverse.
inline IsdfDecomposition fit_auxiliary_basis(const Matrix& psi_a,
                                             const Matrix& psi_b,
                                             const std::vector<int>& points,
                                             PairSetLabel label = PairSetLabel::vc,
                                             double k_mu = 0.0) {
  const int n_mu = static_cast<int>(points.size());
  if (n_mu < 1) throw invalid_input("fit_auxiliary_basis: empty point set");
  for (std::size_t i = 1; i < points.size(); ++i)
    if (points[i] <= points[i - 1])
      throw invalid_input(
          "fit_auxiliary_basis: points must be distinct and sorted");

  Matrix psi_a_mu = rows_at(psi_a, points);
  Matrix psi_b_mu = rows_at(psi_b, points);
  Matrix lhs = hadamard(matmul_nt(psi_a, psi_a_mu), matmul_nt(psi_b, psi_b_mu));
  Matrix gram = rows_at(lhs, points);
  symmetrize(gram);

  IsdfDecomposition dec;
  dec.label = label;
  dec.k_mu = k_mu;
  dec.n_mu = n_mu;
  dec.point_indices = points;
  try {
    // gram is symmetric PSD; solve gram * P^T = lhs^T.
    dec.p = transpose(lu_solve(gram, transpose(lhs)));
  } catch (const singular_matrix&) {
    SymEigResult ev = sym_eig(gram);
    double lam_max = 0.0;
    for (double v : ev.values) lam_max = std::max(lam_max, std::abs(v));
    if (lam_max <= 0.0)
      throw numeric_error("fit_auxiliary_basis: degenerate Gram matrix");
    std::vector<double> inv(ev.values.size(), 0.0);
    int kept = 0;
    for (std::size_t i = 0; i < ev.values.size(); ++i)
      if (std::abs(ev.values[i]) > 1e-12 * lam_max) {
        inv[i] = 1.0 / ev.values[i];
        ++kept;
      }
    if (kept == 0)
      throw numeric_error("fit_auxiliary_basis: degenerate Gram matrix");
    Matrix pinv = matmul_nt(scale_cols(ev.q, inv), ev.q);
    dec.p = matmul(lhs, pinv);
  }
  return dec;
}

// Convenience: wavefunction factor pair for a labeled set.
inline std::pair<Matrix, Matrix> pair_factors(const ElectronicStructure& es,
                                              PairSetLabel label) {
  switch (label) {
    case PairSetLabel::vc: return {es.occupied(), es.unoccupied()};
    case PairSetLabel::vn: return {es.occupied(), es.psi};
    default: return {es.psi, es.psi};
  }
}

// Select + fit for a labeled pair set of an electronic structure.
inline IsdfDecomposition build_isdf(const ElectronicStructure& es,
                                    PairSetLabel label, double k_mu,
                                    PointSelector method = PointSelector::qrcp_direct) {
  auto [a, b] = pair_factors(es, label);
  int n_mu = std::clamp(num_aux(k_mu, a.cols(), b.cols()), 1, es.grid.n_r());
  std::vector<int> pts = select_interpolation_points(a, b, n_mu, method);
  return fit_auxiliary_basis(a, b, pts, label, k_mu);
}

// The C factor: pair matrix restricted to interpolation rows, built from
// point samples without materializing M.
inline Matrix isdf_coefficients(const Matrix& psi_a, const Matrix& psi_b,
                                const IsdfDecomposition& dec) {
  return pair_matrix(rows_at(psi_a, dec.point_indices),
                     rows_at(psi_b, dec.point_indices));
}

// ||M - P*C||_F / ||M||_F with M materialized (guarded); C is read off as the
// rows of M at the interpolation points.
inline double isdf_reconstruction_error(const Matrix& psi_a,
                                        const Matrix& psi_b,
                                        const IsdfDecomposition& dec) {
  Matrix m = pair_matrix(psi_a, psi_b);
  Matrix c = rows_at(m, dec.point_indices);
  Matrix diff = m - matmul(dec.p, c);
  return frobenius_norm(diff) / frobenius_norm(m);
}

// Descending singular values of the pair matrix, truncated to max_terms.
// Computed from the eigenvalues of the smaller Gram matrix.
inline std::vector<double> singular_value_report(const Matrix& psi_a,
                                                 const Matrix& psi_b,
                                                 int max_terms) {
  Matrix m = pair_matrix(psi_a, psi_b);
  Matrix gram = (m.cols() <= m.rows()) ? matmul_tn(m, m) : matmul_nt(m, m);
  symmetrize(gram);
  SymEigResult ev = sym_eig(gram);
  std::vector<double> sv;
  sv.reserve(ev.values.size());
  for (auto it = ev.values.rbegin(); it != ev.values.rend(); ++it)
    sv.push_back(std::sqrt(std::max(*it, 0.0)));
  if (max_terms >= 0 && static_cast<int>(sv.size()) > max_terms)
    sv.resize(max_terms);
  return sv;
}

}  // namespace lrgw
