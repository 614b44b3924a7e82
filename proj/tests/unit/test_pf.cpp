#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "ccopf/errors.hpp"
#include "ccopf/pf.hpp"
#include "support/oracles.hpp"
#include "support/random_cases.hpp"

using namespace ccopf;

namespace {

Network two_bus(double beta = 1.0, double pbar = 10.0) {
  return Network::build(testing::plain_buses(2), {{0, 0.0, 5.0, 1.0, 0.0, 0.0}}, {{0, 1, beta, pbar}});
}

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(v.size());
  int i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

double max_recovery_error(const Network& net, const FlowState& s) {
  double worst = 0.0;
  for (int k = 0; k < net.num_lines(); ++k) {
    const auto& l = net.line(k);
    worst = std::max(worst, std::abs(std::sin(s.theta[l.from] - s.theta[l.to]) - s.rho[k]));
  }
  return worst;
}

}  // namespace

TEST_CASE("psi closed form against quadrature") {
  CHECK(psi(-1.0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(std::abs(psi(1.0)) < 1e-15);
  CHECK(psi(0.0) == doctest::Approx(1.0 - std::numbers::pi / 2.0).epsilon(1e-14));
  auto asin_fn = [](double y) { return std::asin(y); };
  for (double x : {-0.9, -0.5, 0.0, 0.3, 0.8, 1.0}) {
    CHECK(psi(x) == doctest::Approx(testing::integrate(asin_fn, -1.0, x, 1e-13)).epsilon(1e-9));
  }
  CHECK_THROWS_AS(psi(1.0 + 1e-9), DomainError);
}

TEST_CASE("psi is convex") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const double a = u(rng);
    const double b = u(rng);
    CHECK(psi(0.5 * (a + b)) <= 0.5 * (psi(a) + psi(b)) + 1e-15);
  }
}

TEST_CASE("two-bus power flow") {
  Network net = two_bus();
  FlowState s = solve_pf(net, vec({0.5, -0.5}));
  CHECK(s.feasible);
  CHECK_FALSE(s.boundary_hit);
  CHECK(s.rho[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(s.theta[0] - s.theta[1] == doctest::Approx(std::numbers::pi / 6.0).epsilon(1e-10));

  FlowState bad = solve_pf(net, vec({1.5, -1.5}));
  CHECK_FALSE(bad.feasible);
  CHECK(bad.boundary_hit);
  CHECK(bad.at_bound[0]);

  CHECK_THROWS_AS(solve_pf(net, vec({0.5, -0.4})), UnbalancedInjections);
  CHECK_THROWS_AS(solve_pf(net, vec({0.5})), DimensionMismatch);
}

TEST_CASE("thermal cap normalized to rho space") {
  // pbar/beta = 0.4 < 0.5: the single line cannot carry the injection.
  Network net = two_bus(1.0, 0.4);
  FlowState s = solve_pf(net, vec({0.5, -0.5}));
  CHECK(s.boundary_hit);
  PfOptions sync_only;
  sync_only.thermal_cap = false;
  CHECK(solve_pf(net, vec({0.5, -0.5}), sync_only).feasible);
}

TEST_CASE("triangle matches the Newton oracle on the sine equations") {
  Network net = Network::build(testing::plain_buses(3), {{0, 0, 5, 1, 0, 0}},
                               {{0, 1, 1.0, 10.0}, {1, 2, 1.0, 10.0}, {0, 2, 1.0, 10.0}});
  VectorXd q = vec({1.2, -0.6, -0.6});
  FlowState s = solve_pf(net, q);
  REQUIRE(s.feasible);
  std::vector<testing::Arc> arcs;
  for (const auto& l : net.lines()) arcs.push_back({l.from, l.to, l.beta});
  VectorXd start = net.laplacian().apply_reduced_inverse(q);
  VectorXd theta = testing::newton_sine_flow(3, arcs, q, start, net.slack());
  for (int k = 0; k < 3; ++k) {
    const auto& l = net.line(k);
    CHECK(std::abs(s.rho[k] - std::sin(theta[l.from] - theta[l.to])) < 1e-6);
  }
}

TEST_CASE("energy function solve") {
  SUBCASE("two-bus agrees with the convex solve") {
    Network net = two_bus();
    VectorXd q = vec({0.5, -0.5});
    FlowState e = energy_function_solve(net, q);
    FlowState s = solve_pf(net, q);
    CHECK(std::abs((e.theta[0] - e.theta[1]) - (s.theta[0] - s.theta[1])) < 1e-8);
  }
  SUBCASE("zero injections") {
    Network net = two_bus();
    FlowState e = energy_function_solve(net, VectorXd::Zero(2));
    CHECK(e.theta.cwiseAbs().maxCoeff() == 0.0);
    CHECK(e.objective == 0.0);
  }
  SUBCASE("random 10-node tree") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 5; ++trial) {
      auto lines = testing::random_connected_lines(10, 0, rng);
      Network net = Network::build(testing::plain_buses(10), {{0, 0, 5, 1, 0, 0}}, lines);
      VectorXd q = testing::random_balanced_injections(net, 0.8, rng);
      FlowState e = energy_function_solve(net, q);
      FlowState s = solve_pf(net, q);
      REQUIRE(s.feasible);
      for (int k = 0; k < net.num_lines(); ++k) {
        CHECK(std::abs(e.rho[k] * net.line(k).beta - s.rho[k] * net.line(k).beta) < 1e-6);
      }
    }
  }
}

TEST_CASE("random meshed networks: recovery, conservation, consistency") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = std::uniform_int_distribution<int>(3, 30)(rng);
    auto lines = testing::random_connected_lines(n, n / 2, rng);
    Network net = Network::build(testing::plain_buses(n), {{0, 0, 5, 1, 0, 0}}, lines);
    VectorXd q = testing::random_balanced_injections(net, 0.9, rng);
    FlowState s = solve_pf(net, q);
    REQUIRE(s.feasible);
    CHECK(max_recovery_error(net, s) <= 1e-8);
    CHECK(conservation_residual(net, s.rho, q).cwiseAbs().maxCoeff() <= 1e-8);
    double f = 0.0;
    for (int k = 0; k < net.num_lines(); ++k) f += net.line(k).beta * psi(s.rho[k]);
    CHECK(std::abs(f - s.objective) <= 1e-10);

    FlowState e = energy_function_solve(net, q);
    VectorXd mismatch = -q;
    for (const auto& l : net.lines()) {
      const double flow = l.beta * std::sin(e.theta[l.from] - e.theta[l.to]);
      mismatch[l.from] += flow;
      mismatch[l.to] -= flow;
    }
    CHECK(mismatch.cwiseAbs().maxCoeff() <= 1e-7);
  }
}
