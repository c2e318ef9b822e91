#pragma once

#include <utility>
#include <vector>

#include "lrgw/contour.hpp"
#include "lrgw/errors.hpp"
#include "lrgw/isdf.hpp"
#include "lrgw/linalg.hpp"
#include "lrgw/matrix.hpp"
#include "lrgw/model.hpp"

namespace lrgw {

// Generic Sherman-Morrison-Woodbury update:
// (A + U W^T)^{-1} = A^{-1} - A^{-1} U (I + W^T A^{-1} U)^{-1} W^T A^{-1}.
// Dense helper kept for tests and small updates.
inline Matrix smw_inverse(const Matrix& a, const Matrix& u, const Matrix& w) {
  if (a.rows() != a.cols()) throw invalid_input("smw_inverse: A not square");
  if (u.rows() != a.rows() || w.rows() != a.rows() || u.cols() != w.cols())
    throw invalid_input("smw_inverse: factor shape mismatch");
  Matrix a_inv = lu_invert(a);
  if (u.cols() == 0) return a_inv;
  Matrix x = matmul(a_inv, u);                       // A^{-1} U
  Matrix inner = matmul_tn(w, x);                    // W^T A^{-1} U
  for (int i = 0; i < inner.rows(); ++i) inner(i, i) += 1.0;
  Matrix inner_inv;
  try {
    inner_inv = lu_invert(inner);
  } catch (const singular_matrix& e) {
    throw singular_matrix("smw_inverse: inner capacitance matrix singular",
                          e.pivot_index);
  }
  Matrix wt_ainv = matmul_tn(w, a_inv);
  return a_inv - matmul(matmul(x, inner_inv), wt_ainv);
}

// K = (T^{-1}/2 - P^T V P)^{-1}, the small matrix at the core of the low-rank
// epsilon inverse. T must be symmetric negative definite (gapped input with a
// full-row-rank coefficient matrix); failures surface as errors rather than
// being regularized away.
inline Matrix assemble_K(const Matrix& t, const Matrix& p_vc,
                         const CoulombOperator& v, int threads = 1) {
  if (t.rows() != t.cols() || t.rows() != p_vc.cols())
    throw invalid_input("assemble_K: T / P_vc shape mismatch");

  SymEigResult ev = sym_eig(t);
  if (!(ev.values.back() < 0.0))
    throw numeric_error(
        "assemble_K: T is not negative definite (gapless or rank-deficient "
        "input)");

  Matrix half_t_inv;
  try {
    half_t_inv = lu_solve(t, 0.5 * Matrix::identity(t.rows()));
  } catch (const singular_matrix& e) {
    throw singular_matrix("assemble_K: T singular", e.pivot_index);
  }
  symmetrize(half_t_inv);

  Matrix pvp = matmul_tn(p_vc, apply_coulomb(v, p_vc, threads));
  symmetrize(pvp);

  Matrix k;
  try {
    k = lu_invert(half_t_inv - pvp);
  } catch (const singular_matrix& e) {
    throw singular_matrix("assemble_K: middle matrix singular",
                          e.pivot_index);
  }
  symmetrize(k);
  return k;
}

// Factored representation eps^{-1} = I + V P_vc K P_vc^H with the V P_vc
// product cached; everything needed to apply the inverse in O(N_r N_mu m).
struct EpsilonInverseLowRank {
  Matrix p_vc;
  Matrix k;
  CoulombOperator v;
  Matrix vp;  // V * P_vc
};

inline EpsilonInverseLowRank build_epsilon_inverse(const Matrix& t,
                                                   const Matrix& p_vc,
                                                   const CoulombOperator& v,
                                                   int threads = 1) {
  EpsilonInverseLowRank e;
  e.p_vc = p_vc;
  e.k = assemble_K(t, p_vc, v, threads);
  e.v = v;
  e.vp = apply_coulomb(v, p_vc, threads);
  return e;
}

// eps^{-1} X = X + VP (K (P^T X)).
inline Matrix epsilon_inverse_apply(const EpsilonInverseLowRank& e,
                                    const Matrix& x) {
  if (x.rows() != e.p_vc.rows())
    throw invalid_input("epsilon_inverse_apply: row mismatch");
  Matrix y = matmul(e.vp, matmul(e.k, matmul_tn(e.p_vc, x)));
  return x + y;
}

// Dense materialization of the low-rank inverse, for oracle comparisons.
inline Matrix epsilon_inverse_dense(const EpsilonInverseLowRank& e) {
  Matrix m = matmul(matmul(e.vp, e.k), transpose(e.p_vc));
  for (int i = 0; i < m.rows(); ++i) m(i, i) += 1.0;
  return m;
}

// ---------------------------------------------------------------------------
// Dense oracles
// ---------------------------------------------------------------------------

inline constexpr int kDenseEpsilonGuard = 1024;

// chi = 2 M Omega^{-1} M^H from the exact pair matrix.
inline Matrix chi_dense_exact(const ElectronicStructure& es,
                              const OmegaDiagonal& omega) {
  Matrix m = pair_matrix(es.occupied(), es.unoccupied());
  std::vector<double> w(omega.entries.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 2.0 / omega.entries[i];
  Matrix chi = matmul_nt(scale_cols(m, w), m);
  symmetrize(chi);
  return chi;
}

// chi = 2 (P C) Omega^{-1} (P C)^H from an ISDF factorization of M_vc.
inline Matrix chi_dense_isdf(const ElectronicStructure& es,
                             const OmegaDiagonal& omega,
                             const IsdfDecomposition& dec_vc) {
  Matrix c = isdf_coefficients(es.occupied(), es.unoccupied(), dec_vc);
  Matrix pc = matmul(dec_vc.p, c);
  std::vector<double> w(omega.entries.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 2.0 / omega.entries[i];
  Matrix chi = matmul_nt(scale_cols(pc, w), pc);
  symmetrize(chi);
  return chi;
}

struct EpsilonDense {
  Matrix eps;      // I - V chi
  Matrix eps_inv;  // LU inverse
};

// Builds epsilon densely from either the ISDF-approximated or the exact pair
// matrix and inverts it by LU. Validation-only path, guarded at N_r <= 1024.
inline EpsilonDense epsilon_dense_oracle(const ElectronicStructure& es,
                                         const CoulombOperator& v,
                                         const IsdfDecomposition* dec_vc,
                                         int threads = 1) {
  const int n_r = es.grid.n_r();
  if (n_r > kDenseEpsilonGuard)
    throw guard_exceeded("epsilon_dense_oracle: N_r exceeds dense guard");
  OmegaDiagonal omega = build_omega(es);
  Matrix chi = dec_vc ? chi_dense_isdf(es, omega, *dec_vc)
                      : chi_dense_exact(es, omega);
  EpsilonDense out;
  out.eps = -1.0 * apply_coulomb(v, chi, threads);
  for (int i = 0; i < n_r; ++i) out.eps(i, i) += 1.0;
  try {
    out.eps_inv = lu_invert(out.eps);
  } catch (const singular_matrix& e) {
    throw singular_matrix("epsilon_dense_oracle: epsilon singular",
                          e.pivot_index);
  }
  return out;
}

}  // namespace lrgw
