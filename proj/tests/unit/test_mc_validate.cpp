#include <doctest.h>

#include <cmath>
#include <random>

#include "ccopf/cc_opf.hpp"
#include "ccopf/errors.hpp"
#include "ccopf/gaussian.hpp"
#include "ccopf/mc_validate.hpp"
#include "support/random_cases.hpp"

using namespace ccopf;

namespace {

// Generator at bus 0 serving load 0.5 at bus 1; wind at the load bus.
Network two_bus(double sigma) {
  auto buses = testing::plain_buses(2);
  buses[1].demand = 0.5;
  buses[1].wind_sigma = sigma;
  return Network::build(buses, {{0, 0.0, 5.0, 1.0, 0.0, 0.0}}, {{0, 1, 1.0, 0.7}});
}

Dispatch single(double p) {
  return {VectorXd::Constant(1, p), VectorXd::Ones(1)};
}

}  // namespace

TEST_CASE("gaussian draws") {
  CHECK(gaussian_draw(7, 3, 1) == gaussian_draw(7, 3, 1));
  CHECK(gaussian_draw(7, 3, 1) != gaussian_draw(7, 3, 2));
  CHECK(gaussian_draw(7, 3, 1) != gaussian_draw(8, 3, 1));
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int s = 0; s < n; ++s) {
    const double z = gaussian_draw(11, s, 0);
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / n) < 4.0 / std::sqrt(double(n)));
  CHECK(sq / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("zero variance gives no events") {
  Network net = two_bus(0.0);
  McOptions opt;
  opt.samples = 1000;
  opt.nonlinear = true;
  McReport rep = run_mc(net, single(0.5), opt);
  CHECK(rep.nonlinear);
  CHECK(rep.lines[0].thermal_linear.total() == 0);
  CHECK(rep.lines[0].sync_linear.total() == 0);
  CHECK(rep.lines[0].thermal_nonlinear.total() == 0);
  CHECK(rep.lines[0].sync_loss_nonlinear == 0);
  CHECK(rep.generators[0].total() == 0);
  CHECK(rep.pf_failures == 0);
}

TEST_CASE("binding two-bus line hits its tolerance") {
  const double eps = 0.05;
  Network net = two_bus(0.2 / eta(eps));
  McOptions opt;
  opt.samples = 100000;
  opt.seed = 3;
  McReport rep = run_mc(net, single(0.5), opt);
  CHECK_FALSE(rep.nonlinear);
  const double freq = rep.frequency(rep.lines[0].thermal_linear.worst_side());
  CHECK(std::abs(freq - eps) <= binomial_half_width(eps, opt.samples));
  CHECK(rep.lines[0].thermal_linear.below == 0);

  ChanceSpec spec = ChanceSpec::uniform(net, eps, 1e-4, eps);
  CHECK(certify(rep, spec).passed);
  ChanceSpec strict = ChanceSpec::uniform(net, 0.01, 1e-4, eps);
  Certification c = certify(rep, strict);
  CHECK_FALSE(c.passed);
  bool found = false;
  for (const auto& e : c.entries) {
    if (e.constraint == "thermal" && e.index == 0) {
      found = true;
      CHECK_FALSE(e.passed);
    }
  }
  CHECK(found);
}

TEST_CASE("determinism across thread counts") {
  Network net = two_bus(0.15);
  McOptions opt;
  opt.samples = 20000;
  opt.seed = 42;
  opt.threads = 1;
  McReport a = run_mc(net, single(0.5), opt);
  opt.threads = 4;
  McReport b = run_mc(net, single(0.5), opt);
  CHECK(a.lines[0].thermal_linear.above == b.lines[0].thermal_linear.above);
  CHECK(a.lines[0].thermal_linear.below == b.lines[0].thermal_linear.below);
  CHECK(a.generators[0].above == b.generators[0].above);
  opt.seed = 43;
  McReport c = run_mc(net, single(0.5), opt);
  CHECK(a.lines[0].thermal_linear.above != c.lines[0].thermal_linear.above);
}

TEST_CASE("linear frequencies match the analytic probabilities") {
  std::mt19937_64 rng(5);
  auto lines = testing::random_connected_lines(8, 5, rng);
  for (auto& l : lines) l.pbar = 0.15 * l.beta;
  auto buses = testing::plain_buses(8);
  buses[2].wind_sigma = 0.2;
  buses[5].wind_sigma = 0.15;
  buses[6].demand = 0.4;
  buses[7].demand = 0.3;
  std::vector<Generator> gens = {{0, 0, 5, 1, 0, 0}, {3, 0, 5, 1, 0, 0}};
  Network net = Network::build(buses, gens, lines);
  Dispatch d{VectorXd(2), VectorXd(2)};
  d.p << 0.45, 0.25;
  d.alpha << 0.6, 0.4;

  ChanceModel model(net);
  ChanceSpec spec = ChanceSpec::uniform(net, 0.05, 0.05, 0.05);
  McOptions opt;
  opt.samples = 100000;
  McReport rep = run_mc(net, d, opt);
  for (const auto& con : conic_constraints(net, spec)) {
    if (con.kind != ConstraintKind::Thermal) continue;
    const double mean = model.mean_angle(con.line, d.p);
    const double s = model.angle_std(con.line, d.alpha);
    const double p_above = upper_tail((con.bound - mean) / s);
    const double p_below = upper_tail((con.bound + mean) / s);
    const auto& c = rep.lines[con.line].thermal_linear;
    // 4 sigma so that the whole family passes with overwhelming probability.
    const double tol_a = 4.0 * std::sqrt(p_above * (1 - p_above) / opt.samples) + 1e-5;
    const double tol_b = 4.0 * std::sqrt(p_below * (1 - p_below) / opt.samples) + 1e-5;
    CHECK(std::abs(rep.frequency(c.above) - p_above) <= tol_a);
    CHECK(std::abs(rep.frequency(c.below) - p_below) <= tol_b);
  }
}

TEST_CASE("tree networks: sine and linear thermal events agree") {
  std::mt19937_64 rng(9);
  auto lines = testing::random_connected_lines(7, 0, rng);
  for (auto& l : lines) l.pbar = 0.1 * l.beta;
  auto buses = testing::plain_buses(7);
  buses[3].wind_sigma = 0.1;
  buses[5].demand = 0.2;
  Network net = Network::build(buses, {{0, 0, 5, 1, 0, 0}}, lines);
  McOptions opt;
  opt.samples = 3000;
  McReport rep = run_mc(net, single(0.2), opt);
  REQUIRE(rep.nonlinear);
  CHECK(rep.pf_failures == 0);
  std::int64_t events = 0;
  for (const auto& c : rep.lines) {
    CHECK(c.sync_loss_nonlinear == 0);
    CHECK(c.thermal_linear.above == c.thermal_nonlinear.above);
    CHECK(c.thermal_linear.below == c.thermal_nonlinear.below);
    events += c.thermal_linear.total();
  }
  CHECK(events > 0);
}

TEST_CASE("confidence interval width") {
  const double w1 = binomial_half_width(0.05, 10000);
  const double w2 = binomial_half_width(0.05, 1000000);
  CHECK(w1 / w2 == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(w1 == doctest::Approx(2.5758293035489004 * std::sqrt(0.05 * 0.95 / 10000)).epsilon(1e-14));
}

TEST_CASE("invalid input") {
  Network net = two_bus(0.1);
  McOptions opt;
  opt.samples = 0;
  CHECK_THROWS_AS(run_mc(net, single(0.5), opt), DomainError);
  opt.samples = 10;
  CHECK_THROWS_AS(run_mc(net, Dispatch{VectorXd::Zero(2), VectorXd::Zero(2)}, opt), DimensionMismatch);
}
