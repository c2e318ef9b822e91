#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "lrgw/dft.hpp"
#include "lrgw/grid.hpp"
#include "lrgw/linalg.hpp"
#include "lrgw/matrix.hpp"
#include "lrgw/rng.hpp"

using namespace lrgw;

namespace {

Matrix permute_cols(const Matrix& a, const std::vector<int>& perm) {
  Matrix p(a.rows(), a.cols());
  for (int j = 0; j < a.cols(); ++j)
    for (int i = 0; i < a.rows(); ++i) p(i, j) = a(i, perm[j]);
  return p;
}

Matrix random_orthogonal(int n, Rng& rng) {
  return qrcp(Matrix::gaussian(n, n, rng)).q;
}

}  // namespace

TEST_CASE("qrcp on identity selects every column with unit pivots") {
  QrcpResult f = qrcp(Matrix::identity(4));
  std::vector<int> seen(4, 0);
  for (int p : f.perm) {
    REQUIRE(p >= 0);
    REQUIRE(p < 4);
    seen[p]++;
  }
  for (int c : seen) CHECK(c == 1);
  for (int k = 0; k < 4; ++k) CHECK(std::abs(f.r(k, k)) == doctest::Approx(1.0));
}

TEST_CASE("qrcp reconstructs A*Pi = Q*R") {
  Rng rng(7);
  Matrix a = Matrix::gaussian(20, 8, rng);
  QrcpResult f = qrcp(a);
  Matrix diff = permute_cols(a, f.perm) - matmul(f.q, f.r);
  CHECK(frobenius_norm(diff) <= 1e-12 * frobenius_norm(a));

  // Orthonormal columns.
  Matrix g = matmul_tn(f.q, f.q) - Matrix::identity(f.q.cols());
  CHECK(frobenius_norm(g) <= 1e-13);
}

TEST_CASE("qrcp flags duplicate columns through a ~zero pivot") {
  Rng rng(3);
  Matrix a = Matrix::gaussian(12, 6, rng);
  for (int i = 0; i < 12; ++i) a(i, 5) = a(i, 2);
  QrcpResult f = qrcp(a);
  CHECK(std::abs(f.r(5, 5)) <= 1e-12 * frobenius_norm(a));
}

TEST_CASE("qrcp pivot magnitudes are non-increasing") {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    Matrix a = Matrix::gaussian(15, 10, rng);
    QrcpResult f = qrcp(a);
    for (int k = 1; k < 10; ++k)
      CHECK(std::abs(f.r(k, k)) <= std::abs(f.r(k - 1, k - 1)) + 1e-12);
  }
}

TEST_CASE("lu inverts 2I exactly") {
  Matrix a = 2.0 * Matrix::identity(3);
  Matrix inv = lu_invert(a);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(inv(i, j) == doctest::Approx(i == j ? 0.5 : 0.0).epsilon(1e-14));
}

TEST_CASE("lu solve residual on a well-conditioned system") {
  Rng rng(5);
  Matrix a = Matrix::identity(16) + 0.1 * Matrix::gaussian(16, 16, rng);
  Matrix b = Matrix::gaussian(16, 3, rng);
  Matrix x = lu_solve(a, b);
  Matrix r = matmul(a, x) - b;
  CHECK(frobenius_norm(r) <= 1e-11 * frobenius_norm(b));
}

TEST_CASE("lu reports singular matrices") {
  CHECK_THROWS_AS(lu_factor(Matrix(4, 4)), singular_matrix);
  try {
    lu_factor(Matrix(4, 4));
  } catch (const singular_matrix& e) {
    CHECK(e.pivot_index == 0);
  }
}

TEST_CASE("lu left and right inverses agree") {
  Rng rng(17);
  const int n = 12;
  Matrix a = Matrix::identity(n) + 0.2 * Matrix::gaussian(n, n, rng);
  Matrix inv = lu_invert(a);
  Matrix d = matmul(inv, a) - matmul(a, inv);
  CHECK(frobenius_norm(d) <= 1e-9 * n);
}

TEST_CASE("sym_eig of a diagonal matrix sorts the values") {
  Matrix a(3, 3);
  a(0, 0) = 3.0;
  a(1, 1) = 1.0;
  a(2, 2) = 2.0;
  SymEigResult ev = sym_eig(a);
  CHECK(ev.values[0] == doctest::Approx(1.0));
  CHECK(ev.values[1] == doctest::Approx(2.0));
  CHECK(ev.values[2] == doctest::Approx(3.0));
}

TEST_CASE("sym_eig recovers a constructed spectrum") {
  Rng rng(23);
  const int n = 20;
  Matrix q = random_orthogonal(n, rng);
  std::vector<double> lam(n);
  for (int i = 0; i < n; ++i) lam[i] = -5.0 + 10.0 * rng.uniform();
  Matrix a = matmul_nt(scale_cols(q, lam), q);
  symmetrize(a);
  SymEigResult ev = sym_eig(a);

  std::vector<double> sorted = lam;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < n; ++i)
    CHECK(std::abs(ev.values[i] - sorted[i]) <= 1e-9);

  // Residual ||A Q - Q Lambda|| and eigenvector orthonormality.
  Matrix resid = matmul(a, ev.q) - scale_cols(ev.q, ev.values);
  CHECK(frobenius_norm(resid) <= 1e-8 * frobenius_norm(a));
  Matrix g = matmul_tn(ev.q, ev.q) - Matrix::identity(n);
  CHECK(frobenius_norm(g) <= 1e-9);
}

TEST_CASE("sym_eig handles 1x1") {
  Matrix a(1, 1);
  a(0, 0) = 5.0;
  SymEigResult ev = sym_eig(a);
  CHECK(ev.values[0] == doctest::Approx(5.0));
  CHECK(std::abs(std::abs(ev.q(0, 0)) - 1.0) <= 1e-15);
}

TEST_CASE("sym_eig rejects asymmetric input") {
  Matrix a(2, 2);
  a(0, 1) = 1.0;
  a(1, 0) = -1.0;
  CHECK_THROWS_AS(sym_eig(a), invalid_input);
}

TEST_CASE("dft of a delta is flat with modulus 1/sqrt(N_r)") {
  Grid grid({4, 4, 2}, {5.0, 5.0, 5.0});
  std::vector<cplx> x(grid.n_r(), cplx{});
  x[0] = 1.0;
  std::vector<cplx> y = dft(grid, x, DftDirection::forward);
  const double expect = 1.0 / std::sqrt(static_cast<double>(grid.n_r()));
  for (const cplx& v : y) CHECK(std::abs(std::abs(v) - expect) <= 1e-14);
}

TEST_CASE("dft round trip and Parseval") {
  Grid grid({4, 3, 2}, {6.0, 7.0, 8.0});
  Rng rng(31);
  std::vector<cplx> x(grid.n_r());
  for (cplx& v : x) v = cplx(rng.gaussian(), rng.gaussian());
  std::vector<cplx> y = dft(grid, x, DftDirection::forward);
  std::vector<cplx> back = dft(grid, y, DftDirection::inverse);
  double nx = 0.0, ny = 0.0, nd = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    nx += std::norm(x[i]);
    ny += std::norm(y[i]);
    nd += std::norm(back[i] - x[i]);
  }
  CHECK(std::sqrt(nd) <= 1e-12 * std::sqrt(nx));
  CHECK(std::abs(std::sqrt(ny) - std::sqrt(nx)) <= 1e-12 * std::sqrt(nx));
}

TEST_CASE("dft rejects length mismatch") {
  Grid grid({2, 2, 2}, {1.0, 1.0, 1.0});
  std::vector<cplx> x(7);
  CHECK_THROWS_AS(dft(grid, x, DftDirection::forward), invalid_input);
}
