#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "lrgw/elliptic.hpp"
#include "lrgw/rng.hpp"

using namespace lrgw;

TEST_CASE("elliptic_k agrees with direct quadrature of the defining integral") {
  // The dual route: K(r) = int_0^1 dt / sqrt((1-t^2)(1-r^2 t^2)); substituting
  // t = sin(theta) removes the endpoint singularity without changing the value.
  for (double r : {0.0, 1.0 / 3.0, 0.5, 0.9, 0.99}) {
    double by_quad = integrate_adaptive(
        [r](double th) {
          double s = std::sin(th);
          return 1.0 / std::sqrt(1.0 - r * r * s * s);
        },
        0.0, 1.57079632679489661923);
    CHECK(std::abs(elliptic_k(r) - by_quad) <= 1e-10 * by_quad);
  }
  CHECK(elliptic_k(0.0) == doctest::Approx(1.57079632679489661923));
  CHECK_THROWS_AS(elliptic_k(1.0), invalid_input);
  CHECK_THROWS_AS(elliptic_k(-0.1), invalid_input);
}

TEST_CASE("jacobi functions at u = 0") {
  JacobiTriple t = jacobi_sn_cn_dn(0.0, 0.7);
  CHECK(t.sn == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(t.cn == doctest::Approx(1.0));
  CHECK(t.dn == doctest::Approx(1.0));
}

TEST_CASE("jacobi functions degenerate to circular functions at r = 0") {
  for (double u : {-2.0, -0.3, 0.1, 1.7}) {
    JacobiTriple t = jacobi_sn_cn_dn(u, 0.0);
    CHECK(t.sn == doctest::Approx(std::sin(u)).epsilon(1e-14));
    CHECK(t.cn == doctest::Approx(std::cos(u)).epsilon(1e-14));
    CHECK(t.dn == doctest::Approx(1.0));
  }
}

TEST_CASE("sn reaches 1 at the quarter period") {
  const double r = 1.0 / 3.0;
  JacobiTriple t = jacobi_sn_cn_dn(elliptic_k(r), r);
  CHECK(std::abs(t.sn - 1.0) <= 1e-10);
  CHECK(std::abs(t.cn) <= 1e-8);
}

TEST_CASE("jacobi identities hold on the real line") {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    double r = rng.uniform(0.0, 0.97);
    double u = rng.uniform(-4.0, 4.0);
    JacobiTriple t = jacobi_sn_cn_dn(u, r);
    CHECK(std::abs(t.sn * t.sn + t.cn * t.cn - 1.0) <= 1e-12);
    CHECK(std::abs(t.dn * t.dn + r * r * t.sn * t.sn - 1.0) <= 1e-12);
  }
  CHECK_THROWS_AS(jacobi_sn_cn_dn(0.5, 1.0), invalid_input);
}

TEST_CASE("complex jacobi reduces to the real case at y = 0") {
  const double r = 0.4, u = 0.83;
  JacobiTriple re = jacobi_sn_cn_dn(u, r);
  JacobiComplexTriple z = jacobi_complex({u, 0.0}, r);
  CHECK(z.sn.real() == doctest::Approx(re.sn).epsilon(1e-14));
  CHECK(z.sn.imag() == 0.0);
  CHECK(z.cn.real() == doctest::Approx(re.cn).epsilon(1e-14));
  CHECK(z.dn.real() == doctest::Approx(re.dn).epsilon(1e-14));
}

TEST_CASE("sn of a purely imaginary argument is purely imaginary") {
  const double r = 0.3;
  const double kp = std::sqrt(1.0 - r * r);
  for (double y : {0.1, 0.5, 0.9 * elliptic_k(kp)}) {
    JacobiComplexTriple z = jacobi_complex({0.0, y}, r);
    CHECK(std::abs(z.sn.real()) <= 1e-14);
    CHECK(std::abs(z.sn.imag()) > 0.0);
  }
}

TEST_CASE("complex jacobi identities hold inside the fundamental rectangle") {
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    double r = rng.uniform(0.05, 0.95);
    double kp = std::sqrt(1.0 - r * r);
    double x = rng.uniform(-elliptic_k(r), elliptic_k(r));
    double y = rng.uniform(0.0, 0.8 * elliptic_k(kp));
    JacobiComplexTriple z = jacobi_complex({x, y}, r);
    std::complex<double> one(1.0, 0.0);
    CHECK(std::abs(z.sn * z.sn + z.cn * z.cn - one) <= 1e-10);
    CHECK(std::abs(z.dn * z.dn + r * r * z.sn * z.sn - one) <= 1e-10);
  }
}

TEST_CASE("complex jacobi rejects arguments at or beyond the pole line") {
  const double r = 0.5;
  const double kprime = elliptic_k(std::sqrt(1.0 - r * r));
  CHECK_THROWS_AS(jacobi_complex({0.3, kprime * 1.01}, r), invalid_input);
  CHECK_THROWS_AS(jacobi_complex({0.0, kprime - 1e-10}, r), numeric_error);
}

TEST_CASE("adaptive quadrature is accurate on smooth integrands") {
  double val = integrate_adaptive([](double t) { return std::exp(-t * t); },
                                  0.0, 3.0);
  // erf(3) * sqrt(pi) / 2
  CHECK(val == doctest::Approx(0.8862073482595214).epsilon(1e-12));

  // Independent check of the contour-height integrand shape for r = 1/3:
  // compare the adaptive rule against a fine composite Simpson evaluation.
  const double r = 1.0 / 3.0;
  auto f = [r](double t) {
    return 1.0 / std::sqrt((1.0 + t * t) * (1.0 + r * r * t * t));
  };
  double adaptive = integrate_adaptive(f, 0.0, 1.0 / r);
  const int n = 200000;
  const double h = (1.0 / r) / n;
  double simpson = f(0.0) + f(1.0 / r);
  for (int i = 1; i < n; ++i) simpson += f(i * h) * (i % 2 ? 4.0 : 2.0);
  simpson *= h / 3.0;
  CHECK(std::abs(adaptive - simpson) <= 1e-10 * simpson);
}
