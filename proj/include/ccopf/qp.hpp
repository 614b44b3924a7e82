#pragma once

#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace ccopf {

/// min 1/2 x'Qx + c'x  s.t.  A_eq x = b_eq,  A_in x <= b_in,  lo <= x <= hi.
///
/// Empty lo/hi mean unbounded; individual entries may be +-infinity.
struct QuadraticProgram {
  Eigen::MatrixXd Q;
  Eigen::VectorXd c;
  Eigen::MatrixXd A_eq;
  Eigen::VectorXd b_eq;
  Eigen::MatrixXd A_in;
  Eigen::VectorXd b_in;
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  int num_vars() const { return static_cast<int>(c.size()); }
  double objective(const Eigen::VectorXd& x) const { return 0.5 * x.dot(Q * x) + c.dot(x); }
};

enum class QpStatus { Optimal, Infeasible, Unbounded, IterLimit };

std::string_view to_string(QpStatus s);

/// Multipliers follow  Q x + c = A_eq' y - A_in' lambda + lambda_lo - lambda_hi,
/// with lambda, lambda_lo, lambda_hi >= 0.
struct QpSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd duals_eq;
  Eigen::VectorXd duals_in;
  Eigen::VectorXd duals_lo;
  Eigen::VectorXd duals_hi;
  QpStatus status = QpStatus::IterLimit;
  double objective = 0.0;
  int iterations = 0;
  bool regularized = false;
  /// Active inequality constraints in the solver's internal numbering; feed
  /// back through QpOptions::warm_start to resolve a related problem.
  std::vector<int> active_set;
};

struct QpOptions {
  double tol_feas = 1e-8;
  double tol_kkt = 1e-8;
  /// 0 selects 10 * (n_vars + n_cons).
  int max_iter = 0;
  double regularization = 1e-10;
  /// Constraints tried first when several are violated.
  std::vector<int> warm_start;
};

/// Internal numbering used by active_set / warm_start: inequality rows first
/// (0..m_in-1), then finite lower bounds (m_in + i), then finite upper bounds
/// (m_in + n + i).
int qp_lower_bound_index(const QuadraticProgram& qp, int var);
int qp_upper_bound_index(const QuadraticProgram& qp, int var);

/// Dense dual active-set solve. Throws NumericalBreakdown when the Hessian
/// cannot be factored even after regularization, DimensionMismatch on bad shapes.
QpSolution solve_qp(const QuadraticProgram& qp, const QpOptions& options = {});

/// Worst primal violation, stationarity and complementarity residuals of a solution.
struct KktResiduals {
  double primal = 0.0;
  double stationarity = 0.0;
  double complementarity = 0.0;
  double dual_sign = 0.0;
};
KktResiduals kkt_residuals(const QuadraticProgram& qp, const QpSolution& sol);

}  // namespace ccopf
