#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "atomscope/errors.hpp"
#include "atomscope/franck_condon.hpp"

using namespace atomscope;

namespace {

// Independent oracle: the displacement matrix element as the explicit finite
// series with exact integer factorials,
//   |<n|D|m>|^2 = e^{-x} (m!/n!) x^{m+n} [ sum_{k<=min(n,m)} C(n,k) (-1)^k
//                 x^{-k} / (m-k)! ]^2,  x = eta^2.
// Small n only; factorials stay exact in double below 171!.
double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

double binomial(int n, int k) {
  return factorial(n) / (factorial(k) * factorial(n - k));
}

double series_entry(double eta, int n, int m) {
  const double x = eta * eta;
  double sum = 0.0;
  for (int k = 0; k <= std::min(n, m); ++k) {
    sum += binomial(n, k) * ((k % 2) ? -1.0 : 1.0) * std::pow(x, -k) /
           factorial(m - k);
  }
  return std::exp(-x) * factorial(m) / factorial(n) * std::pow(x, m + n) * sum *
         sum;
}

}  // namespace

TEST_CASE("eta = 0 gives the identity") {
  const auto fc = franck_condon_matrix(0.0, 16);
  for (int n = 0; n < 16; ++n) {
    for (int m = 0; m < 16; ++m) {
      CHECK(fc(n, m) == (n == m ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("carrier entry (0,0) = exp(-eta^2)") {
  const double eta = 0.262;
  const auto fc = franck_condon_matrix(eta, 8);
  CHECK(fc(0, 0) == doctest::Approx(std::exp(-eta * eta)).epsilon(1e-13));
  CHECK(fc(0, 0) == doctest::Approx(0.9337).epsilon(1e-4));
}

TEST_CASE("small-ladder explicit-series oracle") {
  // the associated-Laguerre form must match the explicit series exactly
  for (double eta : {0.1, 0.26, 0.262, 0.5, 0.9}) {
    const auto fc = franck_condon_matrix(eta, 4);
    for (int n = 0; n < 4; ++n) {
      for (int m = 0; m < 4; ++m) {
        const double expect = series_entry(eta, n, m);
        CHECK(fc(n, m) == doctest::Approx(expect).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("oracle agreement holds at moderate size too") {
  const double eta = 0.262;
  const auto fc = franck_condon_matrix(eta, 30);
  for (int n = 0; n < 30; n += 3) {
    for (int m = 0; m < 30; m += 4) {
      const double expect = series_entry(eta, n, m);
      const double tol = 1e-11 * std::max(expect, 1e-30);
      CHECK(std::abs(fc(n, m) - expect) <= tol);
    }
  }
}

TEST_CASE("matrix structure") {
  const double eta = 0.262;
  const auto fc = franck_condon_matrix(eta, 130);

  SUBCASE("entries are probabilities") {
    for (int n = 0; n < 130; ++n) {
      for (int m = 0; m < 130; ++m) {
        CHECK(fc(n, m) >= 0.0);
        CHECK(fc(n, m) <= 1.0);
      }
    }
  }

  SUBCASE("symmetric") {
    for (int n = 0; n < 130; ++n) {
      for (int m = 0; m < n; ++m) {
        CHECK(fc(n, m) == fc(m, n));
      }
    }
  }

  SUBCASE("column sums at most 1; deficit grows with m") {
    const auto deficits = fc.column_deficits();
    double prev = -1e-12;
    for (int m = 0; m < 130; ++m) {
      double colsum = 0.0;
      for (int n = 0; n < 130; ++n) colsum += fc(n, m);
      CHECK(colsum <= 1.0 + 1e-12);
      CHECK(deficits[m] >= prev - 1e-12);
      prev = deficits[m];
    }
  }
}

TEST_CASE("completeness of the untruncated ladder") {
  // with the truncation far above all populated levels, columns sum to 1
  for (double eta : {0.1, 0.26, 0.5}) {
    const auto fc = franck_condon_matrix(eta, 400);
    for (int m = 0; m <= 20; ++m) {
      double colsum = 0.0;
      for (int n = 0; n < 400; ++n) colsum += fc(n, m);
      CHECK(std::abs(colsum - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("invalid parameters") {
  CHECK_THROWS_AS((void)franck_condon_matrix(1.0, 10), UnsupportedRegimeError);
  CHECK_THROWS_AS((void)franck_condon_matrix(1.5, 10), UnsupportedRegimeError);
  CHECK_THROWS_AS((void)franck_condon_matrix(-0.1, 10), InvalidParameterError);
  CHECK_THROWS_AS((void)franck_condon_matrix(0.2, 1), InvalidParameterError);
}

TEST_CASE("per-entry evaluation matches the build") {
  const double eta = 0.262;
  const auto fc = franck_condon_matrix(eta, 60);
  for (int n = 0; n < 60; n += 5) {
    for (int m = 0; m < 60; m += 7) {
      CHECK(detail::franck_condon_entry(eta, n, m) ==
            doctest::Approx(fc(n, m)).epsilon(1e-12));
    }
  }
}
