#include <doctest.h>

#include <random>

#include "ccopf/errors.hpp"
#include "ccopf/network.hpp"
#include "support/random_cases.hpp"

using namespace ccopf;

namespace {

Network two_bus(double beta = 1.0) {
  auto buses = testing::plain_buses(2);
  buses[1].demand = 0.8;
  return Network::build(buses, {{0, 0.0, 2.0, 1.0, 0.0, 0.0}}, {{0, 1, beta, 1.0}});
}

}  // namespace

TEST_CASE("two-bus Laplacian and reduced inverse") {
  Network net = two_bus();
  CHECK(net.slack() == 1);
  const MatrixXd& b = net.laplacian().matrix();
  CHECK(b(0, 0) == 1.0);
  CHECK(b(0, 1) == -1.0);
  CHECK(b(1, 0) == -1.0);
  CHECK(b(1, 1) == 1.0);
  VectorXd q(2);
  q << 0.5, -0.5;
  VectorXd theta = net.laplacian().apply_reduced_inverse(q);
  CHECK(theta[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(theta[1] == 0.0);
}

TEST_CASE("triangle reduced inverse matches hand inversion") {
  // Bhat = [[2,-1],[-1,2]] -> inverse (1/3)[[2,1],[1,2]].
  Network net = Network::build(testing::plain_buses(3), {{0, 0, 1, 1, 0, 0}},
                               {{0, 1, 1.0, 1.0}, {1, 2, 1.0, 1.0}, {0, 2, 1.0, 1.0}});
  const MatrixXd& inv = net.laplacian().reduced_inverse();
  CHECK(inv(0, 0) == doctest::Approx(2.0 / 3.0));
  CHECK(inv(0, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(inv(1, 1) == doctest::Approx(2.0 / 3.0));
  CHECK(inv.row(2).norm() == 0.0);
  CHECK(inv.col(2).norm() == 0.0);
  MatrixXd bhat = net.laplacian().matrix().topLeftCorner(2, 2);
  CHECK((bhat * inv.topLeftCorner(2, 2) - MatrixXd::Identity(2, 2)).norm() < 1e-14);
}

TEST_CASE("random graphs: Laplacian rows sum to zero and reduced solve reproduces q") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    std::uniform_int_distribution<int> size(2, 50);
    const int n = size(rng);
    auto lines = testing::random_connected_lines(n, n / 2, rng);
    Network net = Network::build(testing::plain_buses(n), {{0, 0, 1, 1, 0, 0}}, lines);
    const auto& lap = net.laplacian();
    CHECK(lap.matrix().rowwise().sum().cwiseAbs().maxCoeff() < 1e-12);
    const MatrixXd& inv = lap.reduced_inverse();
    CHECK((inv - inv.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    VectorXd q = VectorXd::Random(n);
    q.array() -= q.mean();
    VectorXd theta = lap.apply_reduced_inverse(q);
    CHECK(theta[net.slack()] == 0.0);
    CHECK((lap.matrix() * theta - q).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("construction errors") {
  auto buses = testing::plain_buses(3);
  CHECK_THROWS_AS(Network::build(buses, {}, {{0, 1, 1.0, 1.0}}), DisconnectedGraph);
  CHECK_THROWS_AS(Network::build(buses, {}, {{0, 1, -1.0, 1.0}, {1, 2, 1.0, 1.0}}),
                  NonPositiveSusceptance);
  CHECK_THROWS_AS(Network::build(buses, {{5, 0, 1, 1, 0, 0}}, {{0, 1, 1.0, 1.0}, {1, 2, 1.0, 1.0}}),
                  ValidationError);
  CHECK_THROWS_AS(Network::build(buses, {{0, 2, 1, 1, 0, 0}}, {{0, 1, 1.0, 1.0}, {1, 2, 1.0, 1.0}}),
                  ValidationError);
  buses[1].wind_sigma = -0.1;
  CHECK_THROWS_AS(Network::build(buses, {}, {{0, 1, 1.0, 1.0}, {1, 2, 1.0, 1.0}}), ValidationError);
}

TEST_CASE("parallel lines are merged") {
  Network net = Network::build(testing::plain_buses(2), {{0, 0, 1, 1, 0, 0}},
                               {{0, 1, 1.0, 0.5}, {1, 0, 2.0, 0.25}});
  REQUIRE(net.num_lines() == 1);
  CHECK(net.line(0).beta == 3.0);
  CHECK(net.line(0).pbar == 0.75);
}

TEST_CASE("injection vector") {
  Network net = two_bus();
  Dispatch d{VectorXd::Constant(1, 1.0), VectorXd::Constant(1, 1.0)};

  SUBCASE("zero fluctuation gives p - d + mu") {
    VectorXd q = injection_vector(net, d, VectorXd::Zero(2));
    CHECK(q[0] == doctest::Approx(1.0));
    CHECK(q[1] == doctest::Approx(-0.8));
  }
  SUBCASE("fluctuation at the generator bus is absorbed by alpha") {
    VectorXd w(2);
    w << 0.1, 0.0;
    VectorXd q = injection_vector(net, d, w);
    CHECK(q[0] == doctest::Approx(1.0));
    CHECK(q[1] == doctest::Approx(-0.8));
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(injection_vector(net, d, VectorXd::Zero(3)), DimensionMismatch);
  }
}

TEST_CASE("injection vector is affine in w with slope (1_j - alpha)") {
  std::mt19937_64 rng(11);
  const int n = 6;
  auto buses = testing::plain_buses(n);
  std::vector<Generator> gens = {{0, 0, 5, 1, 0, 0}, {3, 0, 5, 1, 0, 0}, {3, 0, 5, 1, 0, 0}};
  Network net = Network::build(buses, gens, testing::random_connected_lines(n, 2, rng));
  Dispatch d{VectorXd::Random(3), VectorXd(3)};
  d.alpha << 0.2, 0.5, 0.3;
  VectorXd alpha_bus = net.bus_generation(d.alpha);
  VectorXd w0 = VectorXd::Random(n);
  VectorXd q0 = injection_vector(net, d, w0);
  for (int j = 0; j < n; ++j) {
    VectorXd w1 = w0;
    w1[j] += 1.0;
    VectorXd slope = injection_vector(net, d, w1) - q0;
    VectorXd expected = -alpha_bus;
    expected[j] += 1.0;
    CHECK((slope - expected).cwiseAbs().maxCoeff() < 1e-14);
  }
  CHECK(q0.sum() == doctest::Approx(net.bus_generation(d.p).sum() - net.demand().sum() +
                                    net.wind_mean().sum()));
}
