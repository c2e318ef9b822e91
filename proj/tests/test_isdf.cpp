#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "lrgw/isdf.hpp"
#include "lrgw/model.hpp"

using namespace lrgw;

namespace {

ElectronicStructure si8_shaped(std::uint64_t seed = 1) {
  Grid grid({8, 8, 8}, {6.0, 6.0, 6.0});
  return build_synthetic_system(seed, grid, 16, 16, 1.0, 4.0);
}

}  // namespace

TEST_CASE("num_aux follows the square-root rule") {
  CHECK(num_aux(8.0, 16, 16) == 128);
  CHECK(num_aux(8.0, 128, 128) == 1024);
  CHECK(num_aux(1.0, 1, 1) == 1);
  CHECK_THROWS_AS(num_aux(0.0, 4, 4), invalid_input);

  // Monotone in k.
  int prev = 0;
  for (double k = 1.0; k <= 12.0; k += 0.5) {
    int n = num_aux(k, 7, 9);
    CHECK(n >= prev);
    prev = n;
  }
}

TEST_CASE("selecting N_r points returns every grid index") {
  Grid grid({2, 2, 2}, {4.0, 4.0, 4.0});
  ElectronicStructure es = build_synthetic_system(3, grid, 2, 2, 1.0, 2.0);
  std::vector<int> pts = select_interpolation_points(
      es.occupied(), es.unoccupied(), grid.n_r());
  std::vector<int> expect(grid.n_r());
  std::iota(expect.begin(), expect.end(), 0);
  CHECK(pts == expect);
}

TEST_CASE("sketched selection is deterministic") {
  ElectronicStructure es = si8_shaped();
  auto a = es.occupied();
  auto b = es.unoccupied();
  std::vector<int> p1 =
      select_interpolation_points(a, b, 64, PointSelector::qrcp_sketched);
  std::vector<int> p2 =
      select_interpolation_points(a, b, 64, PointSelector::qrcp_sketched);
  CHECK(p1 == p2);
  CHECK(static_cast<int>(p1.size()) == 64);
  for (std::size_t i = 1; i < p1.size(); ++i) CHECK(p1[i] > p1[i - 1]);
}

TEST_CASE("selection rejects impossible point counts") {
  ElectronicStructure es = si8_shaped();
  CHECK_THROWS_AS(select_interpolation_points(es.occupied(), es.unoccupied(),
                                              es.grid.n_r() + 1),
                  invalid_input);
}

TEST_CASE("more interpolation points means lower reconstruction error") {
  ElectronicStructure es = si8_shaped();
  auto a = es.occupied();
  auto b = es.unoccupied();
  std::vector<int> p64 = select_interpolation_points(a, b, 64);
  std::vector<int> p128 = select_interpolation_points(a, b, 128);
  double e64 = isdf_reconstruction_error(a, b, fit_auxiliary_basis(a, b, p64));
  double e128 =
      isdf_reconstruction_error(a, b, fit_auxiliary_basis(a, b, p128));
  CHECK(e128 < e64);
}

TEST_CASE("interpolation with every grid point is exact") {
  Grid grid({4, 4, 2}, {5.0, 5.0, 5.0});
  ElectronicStructure es = build_synthetic_system(5, grid, 3, 3, 1.0, 2.0);
  auto a = es.occupied();
  auto b = es.unoccupied();
  std::vector<int> all(grid.n_r());
  std::iota(all.begin(), all.end(), 0);
  IsdfDecomposition dec = fit_auxiliary_basis(a, b, all);
  CHECK(isdf_reconstruction_error(a, b, dec) <= 1e-9);
}

TEST_CASE("rank-1 pair set is fit exactly by one point") {
  Grid grid({4, 4, 2}, {5.0, 5.0, 5.0});
  ElectronicStructure es = build_synthetic_system(8, grid, 1, 1, 1.0, 1.0);
  auto a = es.occupied();
  auto b = es.unoccupied();
  Matrix m = pair_matrix(a, b);
  int best = 0;
  for (int i = 0; i < m.rows(); ++i)
    if (std::abs(m(i, 0)) > std::abs(m(best, 0))) best = i;
  REQUIRE(std::abs(m(best, 0)) > 0.0);
  IsdfDecomposition dec = fit_auxiliary_basis(a, b, {best});
  CHECK(isdf_reconstruction_error(a, b, dec) <= 1e-12);
}

TEST_CASE("si8-shaped vc reconstruction error has the expected magnitude") {
  ElectronicStructure es = si8_shaped();
  IsdfDecomposition dec = build_isdf(es, PairSetLabel::vc, 8.0);
  CHECK(dec.n_mu == 128);
  double err = isdf_reconstruction_error(es.occupied(), es.unoccupied(), dec);
  // Low-rank compression at k = 8 is decent but far from exact.
  CHECK(err > 1e-4);
  CHECK(err < 0.9);
}

TEST_CASE("reconstruction error dominates the optimal truncation error") {
  ElectronicStructure es = si8_shaped(4);
  auto a = es.occupied();
  auto b = es.unoccupied();
  IsdfDecomposition dec = build_isdf(es, PairSetLabel::vc, 4.0);
  double err = isdf_reconstruction_error(a, b, dec);

  std::vector<double> sv = singular_value_report(a, b, -1);
  double total = 0.0, tail = 0.0;
  for (std::size_t i = 0; i < sv.size(); ++i) total += sv[i] * sv[i];
  for (std::size_t i = dec.n_mu; i < sv.size(); ++i) tail += sv[i] * sv[i];
  double optimal = std::sqrt(tail / total);
  CHECK(err >= optimal - 1e-12);
}

TEST_CASE("reconstruction error is non-increasing in k") {
  ElectronicStructure es = si8_shaped(2);
  auto a = es.occupied();
  auto b = es.unoccupied();
  double prev = 1e300;
  for (double k : {4.0, 6.0, 8.0, 10.0}) {
    IsdfDecomposition dec = build_isdf(es, PairSetLabel::vc, k);
    double err = isdf_reconstruction_error(a, b, dec);
    CHECK(err <= prev * 1.05);
    prev = err;
  }
}

TEST_CASE("C rows equal pair-matrix rows at the interpolation points") {
  Grid grid({4, 4, 4}, {6.0, 6.0, 6.0});
  ElectronicStructure es = build_synthetic_system(6, grid, 4, 4, 1.0, 2.0);
  auto a = es.occupied();
  auto b = es.unoccupied();
  IsdfDecomposition dec = build_isdf(es, PairSetLabel::vc, 3.0);
  Matrix c = isdf_coefficients(a, b, dec);
  Matrix m_rows = rows_at(pair_matrix(a, b), dec.point_indices);
  CHECK(frobenius_norm(c - m_rows) == 0.0);
}

TEST_CASE("singular value report properties") {
  ElectronicStructure es = si8_shaped(9);
  auto a = es.occupied();
  auto b = es.unoccupied();

  SUBCASE("descending and nonnegative, Frobenius identity") {
    std::vector<double> sv = singular_value_report(a, b, -1);
    for (std::size_t i = 0; i < sv.size(); ++i) {
      CHECK(sv[i] >= 0.0);
      if (i > 0) CHECK(sv[i] <= sv[i - 1] + 1e-12);
    }
    double ss = 0.0;
    for (double s : sv) ss += s * s;
    Matrix m = pair_matrix(a, b);
    double fro2 = frobenius_norm(m) * frobenius_norm(m);
    CHECK(std::abs(ss - fro2) <= 1e-8 * fro2);
  }

  SUBCASE("single constant orbital reduces to sorted column norms") {
    // With a constant first factor the pair columns inherit psi_b's
    // orthogonality, so the spectrum is exactly the sorted column norms.
    Matrix a1(a.rows(), 1);
    for (int i = 0; i < a.rows(); ++i) a1(i, 0) = 0.25;
    Matrix b8 = cols_block(b, 0, 8);
    std::vector<double> sv = singular_value_report(a1, b8, -1);
    Matrix m = pair_matrix(a1, b8);
    std::vector<double> norms(m.cols());
    for (int j = 0; j < m.cols(); ++j) {
      double s = 0.0;
      for (int i = 0; i < m.rows(); ++i) s += m(i, j) * m(i, j);
      norms[j] = std::sqrt(s);
    }
    std::sort(norms.rbegin(), norms.rend());
    REQUIRE(sv.size() == norms.size());
    for (std::size_t i = 0; i < sv.size(); ++i)
      CHECK(sv[i] == doctest::Approx(norms[i]).epsilon(1e-10));
  }

  SUBCASE("max_terms truncates") {
    std::vector<double> sv = singular_value_report(a, b, 5);
    CHECK(sv.size() == 5);
  }
}

TEST_CASE("guard rejects oversized pair matrices") {
  // 4096 grid points with 129x128 pairs overflows the 2^26 entry guard.
  Rng rng(1);
  Matrix a = Matrix::gaussian(4096, 129, rng);
  Matrix b = Matrix::gaussian(4096, 128, rng);
  CHECK_THROWS_AS(pair_matrix(a, b), guard_exceeded);
  CHECK_THROWS_AS(pair_matrix_transposed(a, b), guard_exceeded);
}

TEST_CASE("singular Gram matrices fall back to a pseudo-inverse fit") {
  // A grid point where every wavefunction vanishes contributes a zero
  // row/column to the Gram matrix; the fit must still reproduce M away from
  // the degenerate point.
  Grid grid({4, 4, 2}, {5.0, 5.0, 5.0});
  ElectronicStructure es = build_synthetic_system(21, grid, 2, 2, 1.0, 2.0);
  Matrix a = es.occupied();
  Matrix b = es.unoccupied();
  for (int j = 0; j < a.cols(); ++j) a(7, j) = 0.0;
  for (int j = 0; j < b.cols(); ++j) b(7, j) = 0.0;

  std::vector<int> pts = select_interpolation_points(a, b, 4);
  pts[0] = 7;  // force the dead point into the set
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  REQUIRE(pts.size() >= 2);

  IsdfDecomposition dec = fit_auxiliary_basis(a, b, pts);
  double err = isdf_reconstruction_error(a, b, dec);
  CHECK(std::isfinite(err));
  CHECK(err < 1.0);
}

TEST_CASE("fully degenerate pair data is rejected") {
  Matrix a(8, 2), b(8, 2);  // all zero: Gram matrix is identically zero
  CHECK_THROWS_AS(fit_auxiliary_basis(a, b, {1, 3}), numeric_error);
}
