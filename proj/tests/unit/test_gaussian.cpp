#include <doctest.h>

#include <cmath>
#include <vector>

#include "ccopf/errors.hpp"
#include "ccopf/gaussian.hpp"
#include "support/oracles.hpp"

using namespace ccopf;

TEST_CASE("eta at the center is exactly zero") { CHECK(eta(0.5) == 0.0); }

TEST_CASE("eta against the Gaussian-tail quadrature oracle") {
  const double tail2 = testing::gaussian_tail_quadrature(2.0);
  CHECK(tail2 == doctest::Approx(0.0227501319481792).epsilon(1e-12));
  CHECK(std::abs(eta(0.02275) - 2.0) <= 1e-3);
  CHECK(eta(tail2) == doctest::Approx(2.0).epsilon(1e-10));
  for (double z : {0.1, 0.7, 1.5, 3.0, 5.0}) {
    CHECK(eta(testing::gaussian_tail_quadrature(z)) == doctest::Approx(z).epsilon(1e-9));
  }
}

TEST_CASE("eta inverts the tail to 1e-10 relative") {
  for (double x = 0.5; x > 1e-250; x *= 0.37) {
    const double z = eta(x);
    CHECK(std::abs(upper_tail(z) - x) <= 1e-10 * x);
  }
}

TEST_CASE("eta is strictly decreasing") {
  double prev = -1.0;
  for (double x = 0.5; x > 1e-30; x *= 0.8) {
    const double z = eta(x);
    CHECK(z > prev);
    prev = z;
  }
}

TEST_CASE("eta approaches sqrt(2 log(1/x)) from below") {
  std::vector<double> xs = {1e-4, 1e-6, 1e-8, 1e-12};
  double prev = 0.0;
  for (double x : xs) {
    const double ratio = eta(x) / std::sqrt(2.0 * std::log(1.0 / x));
    CHECK(ratio > prev);
    CHECK(ratio < 1.0);
    prev = ratio;
  }
  const double r6 = eta(1e-6) / std::sqrt(2.0 * std::log(1e6));
  CHECK(r6 > 0.85);
}

TEST_CASE("domain errors") {
  CHECK_THROWS_AS(eta(0.0), DomainError);
  CHECK_THROWS_AS(eta(0.6), DomainError);
  CHECK_THROWS_AS(eta(-1.0), DomainError);
  CHECK_THROWS_AS(normal_quantile(1.0), DomainError);
}

TEST_CASE("normal quantile is antisymmetric and inverts the CDF") {
  for (double u : {1e-9, 0.01, 0.2, 0.5, 0.8, 0.99}) {
    const double z = normal_quantile(u);
    CHECK(1.0 - upper_tail(z) == doctest::Approx(u).epsilon(1e-9));
    if (u != 0.5) CHECK(normal_quantile(1.0 - u) == doctest::Approx(-z).epsilon(1e-9));
  }
}
