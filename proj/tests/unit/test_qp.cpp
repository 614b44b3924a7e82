#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "ccopf/errors.hpp"
#include "ccopf/qp.hpp"

using namespace ccopf;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

QuadraticProgram scalar(double q, double c) {
  QuadraticProgram qp;
  qp.Q = MatrixXd::Constant(1, 1, q);
  qp.c = VectorXd::Constant(1, c);
  return qp;
}

void check_kkt(const QuadraticProgram& qp, const QpSolution& sol, double tol = 1e-8) {
  KktResiduals r = kkt_residuals(qp, sol);
  CHECK(r.primal <= tol);
  CHECK(r.stationarity <= tol);
  CHECK(r.complementarity <= tol);
  CHECK(r.dual_sign <= tol);
}

// Random strictly convex QP with a known strictly feasible point x0.
QuadraticProgram random_qp(std::mt19937_64& rng, int n, int m_eq, int m_in, VectorXd& x0) {
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.01, 1.0);
  auto randm = [&](int r, int c) {
    MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) m(i, j) = nd(rng);
    return m;
  };
  QuadraticProgram qp;
  MatrixXd f = randm(n, n);
  qp.Q = f * f.transpose() + 0.1 * MatrixXd::Identity(n, n);
  qp.c = 5.0 * randm(n, 1);
  x0 = randm(n, 1);
  qp.A_eq = randm(m_eq, n);
  qp.b_eq = qp.A_eq * x0;
  qp.A_in = randm(m_in, n);
  qp.b_in = qp.A_in * x0;
  for (int r = 0; r < m_in; ++r) qp.b_in[r] += ud(rng);
  qp.lo = x0.array() - 1.0;
  qp.hi = x0.array() + 1.0;
  return qp;
}

}  // namespace

TEST_CASE("min x^2 s.t. x >= 1") {
  QuadraticProgram qp = scalar(2.0, 0.0);
  SUBCASE("as a general inequality") {
    qp.A_in = MatrixXd::Constant(1, 1, -1.0);
    qp.b_in = VectorXd::Constant(1, -1.0);
    QpSolution sol = solve_qp(qp);
    REQUIRE(sol.status == QpStatus::Optimal);
    CHECK(sol.x[0] == doctest::Approx(1.0));
    CHECK(sol.duals_in[0] == doctest::Approx(2.0));
    CHECK(sol.objective == doctest::Approx(1.0));
    check_kkt(qp, sol);
  }
  SUBCASE("as a variable bound") {
    qp.lo = VectorXd::Constant(1, 1.0);
    QpSolution sol = solve_qp(qp);
    REQUIRE(sol.status == QpStatus::Optimal);
    CHECK(sol.x[0] == doctest::Approx(1.0));
    CHECK(sol.duals_lo[0] == doctest::Approx(2.0));
  }
}

TEST_CASE("min (x-3)^2 unconstrained") {
  // (x-3)^2 = x^2 - 6x + 9; the constant is dropped.
  QuadraticProgram qp = scalar(2.0, -6.0);
  QpSolution sol = solve_qp(qp);
  REQUIRE(sol.status == QpStatus::Optimal);
  CHECK(sol.x[0] == doctest::Approx(3.0));
  CHECK(sol.objective + 9.0 == doctest::Approx(0.0));
}

TEST_CASE("min x^2 + y^2 s.t. x + y = 1 against a grid search") {
  QuadraticProgram qp;
  qp.Q = 2.0 * MatrixXd::Identity(2, 2);
  qp.c = VectorXd::Zero(2);
  qp.A_eq = MatrixXd::Ones(1, 2);
  qp.b_eq = VectorXd::Ones(1);
  QpSolution sol = solve_qp(qp);
  REQUIRE(sol.status == QpStatus::Optimal);
  CHECK(sol.x[0] == doctest::Approx(0.5));
  CHECK(sol.x[1] == doctest::Approx(0.5));
  CHECK(sol.duals_eq[0] == doctest::Approx(1.0));
  check_kkt(qp, sol);

  // Grid over the line x + y = 1.
  double best_x = 0.0;
  double best_f = std::numeric_limits<double>::infinity();
  for (int i = -2000; i <= 2000; ++i) {
    double x = i * 1e-3;
    double f = x * x + (1 - x) * (1 - x);
    if (f < best_f) {
      best_f = f;
      best_x = x;
    }
  }
  CHECK(sol.x[0] == doctest::Approx(best_x).epsilon(1e-3));
  CHECK(sol.objective == doctest::Approx(best_f).epsilon(1e-6));
}

TEST_CASE("infeasible and singular cases") {
  SUBCASE("contradictory bounds") {
    QuadraticProgram qp = scalar(2.0, 0.0);
    qp.A_in = MatrixXd(2, 1);
    qp.A_in << 1.0, -1.0;
    qp.b_in = VectorXd(2);
    qp.b_in << 1.0, -2.0;  // x <= 1 and x >= 2
    CHECK(solve_qp(qp).status == QpStatus::Infeasible);
  }
  SUBCASE("inconsistent equalities") {
    QuadraticProgram qp;
    qp.Q = MatrixXd::Identity(2, 2);
    qp.c = VectorXd::Zero(2);
    qp.A_eq = MatrixXd(2, 2);
    qp.A_eq << 1, 1, 2, 2;
    qp.b_eq = VectorXd(2);
    qp.b_eq << 1, 3;
    CHECK(solve_qp(qp).status == QpStatus::Infeasible);
  }
  SUBCASE("redundant equalities are accepted") {
    QuadraticProgram qp;
    qp.Q = MatrixXd::Identity(2, 2);
    qp.c = VectorXd::Zero(2);
    qp.A_eq = MatrixXd(2, 2);
    qp.A_eq << 1, 1, 2, 2;
    qp.b_eq = VectorXd(2);
    qp.b_eq << 1, 2;
    QpSolution sol = solve_qp(qp);
    REQUIRE(sol.status == QpStatus::Optimal);
    check_kkt(qp, sol);
  }
  SUBCASE("linear objective is regularized") {
    // min x s.t. 0 <= x <= 4
    QuadraticProgram qp = scalar(0.0, 1.0);
    qp.lo = VectorXd::Zero(1);
    qp.hi = VectorXd::Constant(1, 4.0);
    QpSolution sol = solve_qp(qp);
    REQUIRE(sol.status == QpStatus::Optimal);
    CHECK(sol.regularized);
    CHECK(sol.x[0] == doctest::Approx(0.0));
    CHECK(sol.duals_lo[0] == doctest::Approx(1.0));
  }
  SUBCASE("unbounded linear objective") {
    QuadraticProgram qp = scalar(0.0, 1.0);
    CHECK(solve_qp(qp).status == QpStatus::Unbounded);
  }
  SUBCASE("indefinite Hessian") {
    QuadraticProgram qp = scalar(-1.0, 0.0);
    CHECK_THROWS_AS(solve_qp(qp), NumericalBreakdown);
  }
  SUBCASE("shape mismatch") {
    QuadraticProgram qp = scalar(1.0, 0.0);
    qp.A_in = MatrixXd::Ones(1, 2);
    qp.b_in = VectorXd::Ones(1);
    CHECK_THROWS_AS(solve_qp(qp), DimensionMismatch);
  }
}

TEST_CASE("random QPs: KKT certificate, sampled optimality, inactive removal") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    std::uniform_int_distribution<int> dim(2, 12);
    const int n = dim(rng);
    const int m_eq = std::uniform_int_distribution<int>(0, n / 2)(rng);
    const int m_in = std::uniform_int_distribution<int>(1, 3 * n)(rng);
    VectorXd x0;
    QuadraticProgram qp = random_qp(rng, n, m_eq, m_in, x0);
    QpSolution sol = solve_qp(qp);
    REQUIRE(sol.status == QpStatus::Optimal);
    check_kkt(qp, sol);

    // No feasible point sampled around x0 does better.
    std::normal_distribution<double> nd(0.0, 0.3);
    Eigen::FullPivLU<MatrixXd> lu(qp.A_eq.rows() ? qp.A_eq : MatrixXd::Zero(1, n));
    MatrixXd null = lu.kernel();
    for (int s = 0; s < 200; ++s) {
      VectorXd coef(null.cols());
      for (int i = 0; i < coef.size(); ++i) coef[i] = nd(rng);
      VectorXd y = x0 + null * coef;
      bool feasible = ((qp.A_in * y - qp.b_in).array() <= 0).all() &&
                      (y.array() >= qp.lo.array()).all() && (y.array() <= qp.hi.array()).all();
      if (feasible) CHECK(sol.objective <= qp.objective(y) + 1e-8);
    }

    // Drop inequality rows that are inactive at the optimum.
    VectorXd slack = qp.b_in - qp.A_in * sol.x;
    std::vector<int> keep;
    for (int r = 0; r < m_in; ++r) {
      if (slack[r] < 1e-6) keep.push_back(r);
    }
    QuadraticProgram reduced = qp;
    reduced.A_in = MatrixXd(keep.size(), n);
    reduced.b_in = VectorXd(keep.size());
    for (std::size_t i = 0; i < keep.size(); ++i) {
      reduced.A_in.row(i) = qp.A_in.row(keep[i]);
      reduced.b_in[i] = qp.b_in[keep[i]];
    }
    QpSolution sol2 = solve_qp(reduced);
    REQUIRE(sol2.status == QpStatus::Optimal);
    CHECK((sol2.x - sol.x).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("warm start reproduces the cold solution") {
  std::mt19937_64 rng(99);
  VectorXd x0;
  QuadraticProgram qp = random_qp(rng, 8, 2, 30, x0);
  QpSolution cold = solve_qp(qp);
  REQUIRE(cold.status == QpStatus::Optimal);
  // Tighten one more row and resolve using the previous active set.
  qp.A_in.conservativeResize(31, Eigen::NoChange);
  qp.b_in.conservativeResize(31);
  qp.A_in.row(30) = -(qp.Q * cold.x + qp.c).transpose();
  qp.b_in[30] = qp.A_in.row(30).dot(cold.x) - 0.05;
  QpOptions warm;
  warm.warm_start = cold.active_set;
  QpSolution a = solve_qp(qp, warm);
  QpSolution b = solve_qp(qp);
  REQUIRE(a.status == QpStatus::Optimal);
  REQUIRE(b.status == QpStatus::Optimal);
  CHECK((a.x - b.x).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(a.objective >= cold.objective - 1e-12);
}
