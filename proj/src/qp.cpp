// Dense convex QP by the Goldfarb-Idnani dual active-set method.
//
// Internally every constraint is written n'x = b (equalities) or n'x >= b
// (inequalities and bounds). The solver keeps J = L^-T Q_r, where Q = L L' and
// L^-1 N = Q_r [R; 0] for the matrix N of active normals, so that the
// primal step z = J2 J2' n and dual step r = R^-1 J1' n are cheap to form.

#include "ccopf/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "ccopf/errors.hpp"
#include "ccopf/log.hpp"

namespace ccopf {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string_view to_string(QpStatus s) {
  switch (s) {
    case QpStatus::Optimal: return "optimal";
    case QpStatus::Infeasible: return "infeasible";
    case QpStatus::Unbounded: return "unbounded";
    case QpStatus::IterLimit: return "iteration limit";
  }
  return "unknown";
}

int qp_lower_bound_index(const QuadraticProgram& qp, int var) {
  return static_cast<int>(qp.A_in.rows()) + var;
}

int qp_upper_bound_index(const QuadraticProgram& qp, int var) {
  return static_cast<int>(qp.A_in.rows()) + qp.num_vars() + var;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

class DualActiveSet {
 public:
  DualActiveSet(const QuadraticProgram& qp, const QpOptions& opt) : qp_(qp), opt_(opt) {
    n_ = qp.num_vars();
    m_in_ = static_cast<int>(qp.A_in.rows());
    lo_ = qp.lo.size() == n_ ? qp.lo : VectorXd::Constant(n_, -kInf);
    hi_ = qp.hi.size() == n_ ? qp.hi : VectorXd::Constant(n_, kInf);
    row_norm_ = VectorXd::Ones(m_in_ + 2 * n_);
    for (int r = 0; r < m_in_; ++r) row_norm_[r] = std::max(qp.A_in.row(r).norm(), 1e-300);
  }

  QpSolution run() {
    QpSolution sol;
    factor(sol);
    R_ = MatrixXd::Zero(n_, n_);
    x_ = -(J_ * (J_.transpose() * qp_.c));
    q_ = 0;

    const int m_eq = static_cast<int>(qp_.A_eq.rows());
    sol.duals_eq = VectorXd::Zero(m_eq);
    for (int e = 0; e < m_eq; ++e) {
      VectorXd np = qp_.A_eq.row(e).transpose();
      const double s = np.dot(x_) - qp_.b_eq[e];
      VectorXd d = J_.transpose() * np;
      const double d2 = d.tail(n_ - q_).norm();
      if (d2 <= 1e-12 * std::max(d.norm(), 1e-300)) {
        if (std::abs(s) <= opt_.tol_feas * (1.0 + std::abs(qp_.b_eq[e]))) continue;
        sol.status = QpStatus::Infeasible;
        return finish(sol);
      }
      VectorXd z = J_.rightCols(n_ - q_) * d.tail(n_ - q_);
      VectorXd r = dual_step(d);
      const double t = -s / z.dot(np);
      x_ += t * z;
      u_.head(q_) -= t * r;
      add_active(d, encode_eq(e), t);
    }

    std::unordered_set<int> hints(opt_.warm_start.begin(), opt_.warm_start.end());
    const int max_iter = opt_.max_iter > 0 ? opt_.max_iter : 10 * (n_ + m_eq + m_in_ + 2 * n_) + 10;
    std::vector<char> is_active(m_in_ + 2 * n_, 0);
    int iter = 0;

    for (;;) {
      // Pick the next violated constraint.
      VectorXd slack_in;
      if (m_in_ > 0) slack_in = qp_.b_in - qp_.A_in * x_;
      int best = -1;
      double best_v = 0.0;
      bool best_hint = false;
      auto consider = [&](int idx, double slack, double b) {
        if (is_active[idx]) return;
        if (slack >= -violation_tol(b)) return;
        const double v = slack / row_norm_[idx];
        const bool hinted = hints.count(idx) > 0;
        if (best < 0 || (hinted && !best_hint) || (hinted == best_hint && v < best_v)) {
          best = idx;
          best_v = v;
          best_hint = hinted;
        }
      };
      for (int r = 0; r < m_in_; ++r) consider(r, slack_in[r], qp_.b_in[r]);
      for (int i = 0; i < n_; ++i) {
        if (std::isfinite(lo_[i])) consider(m_in_ + i, x_[i] - lo_[i], lo_[i]);
        if (std::isfinite(hi_[i])) consider(m_in_ + n_ + i, hi_[i] - x_[i], hi_[i]);
      }
      if (best < 0) {
        sol.status = QpStatus::Optimal;
        break;
      }

      const int p = best;
      VectorXd np = normal(p);
      const double bp = rhs(p);
      double up = 0.0;
      bool added = false;
      while (!added) {
        if (++iter > max_iter) {
          sol.status = QpStatus::IterLimit;
          sol.iterations = iter;
          return finish(sol);
        }
        const double s = np.dot(x_) - bp;
        VectorXd d = J_.transpose() * np;
        const double d2n = d.tail(n_ - q_).norm();
        const bool z_zero = d2n <= 1e-12 * std::max(d.norm(), 1e-300);
        VectorXd z;
        if (!z_zero) z = J_.rightCols(n_ - q_) * d.tail(n_ - q_);
        VectorXd r = dual_step(d);

        double t1 = kInf;
        int drop = -1;
        for (int j = 0; j < q_; ++j) {
          if (active_[j] < 0) continue;  // equality
          if (r[j] > 1e-14 * std::max(1.0, r.cwiseAbs().maxCoeff())) {
            const double ratio = u_[j] / r[j];
            if (ratio < t1) {
              t1 = ratio;
              drop = j;
            }
          }
        }
        const double t2 = z_zero ? kInf : -s / z.dot(np);
        const double t = std::min(t1, t2);
        if (!std::isfinite(t)) {
          sol.status = QpStatus::Infeasible;
          sol.iterations = iter;
          return finish(sol);
        }
        if (!z_zero) x_ += t * z;
        u_.head(q_) -= t * r;
        up += t;
        if (!z_zero && t2 <= t1) {
          if (!add_active(d, p, up)) {
            throw NumericalBreakdown("active constraint normals became dependent");
          }
          is_active[p] = 1;
          added = true;
        } else {
          is_active[active_[drop]] = 0;
          drop_active(drop);
        }
      }
    }
    sol.iterations = iter;
    return finish(sol);
  }

 private:
  static int encode_eq(int e) { return -1 - e; }

  double violation_tol(double b) const { return 1e-2 * opt_.tol_feas * (1.0 + std::abs(b)); }

  VectorXd normal(int idx) const {
    if (idx < m_in_) return -qp_.A_in.row(idx).transpose();
    VectorXd n = VectorXd::Zero(n_);
    if (idx < m_in_ + n_) {
      n[idx - m_in_] = 1.0;
    } else {
      n[idx - m_in_ - n_] = -1.0;
    }
    return n;
  }

  double rhs(int idx) const {
    if (idx < m_in_) return -qp_.b_in[idx];
    if (idx < m_in_ + n_) return lo_[idx - m_in_];
    return -hi_[idx - m_in_ - n_];
  }

  void factor(QpSolution& sol) {
    if (qp_.Q.rows() != n_ || qp_.Q.cols() != n_ || qp_.A_eq.rows() != qp_.b_eq.size() ||
        qp_.A_in.rows() != qp_.b_in.size() ||
        (qp_.A_in.rows() > 0 && qp_.A_in.cols() != n_) ||
        (qp_.lo.size() != 0 && qp_.lo.size() != n_) || (qp_.hi.size() != 0 && qp_.hi.size() != n_)) {
      throw DimensionMismatch("quadratic program dimensions are inconsistent");
    }
    if (qp_.A_eq.rows() > 0 && qp_.A_eq.cols() != n_) {
      throw DimensionMismatch("equality matrix has wrong width");
    }
    const double scale = std::max(1.0, qp_.Q.cwiseAbs().maxCoeff());
    if ((qp_.Q - qp_.Q.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
      throw NumericalBreakdown("QP Hessian is not symmetric");
    }
    Eigen::LDLT<MatrixXd> ldlt(qp_.Q);
    const VectorXd dvals = ldlt.vectorD();
    const double dmax = n_ > 0 ? std::max(dvals.maxCoeff(), 0.0) : 0.0;
    if (n_ > 0 && dvals.minCoeff() < -1e-9 * std::max(dmax, 1.0)) {
      throw NumericalBreakdown("QP Hessian is not positive semidefinite");
    }
    MatrixXd h = qp_.Q;
    if (n_ > 0 && (ldlt.info() != Eigen::Success || dvals.minCoeff() <= 1e-13 * std::max(dmax, 1.0))) {
      log().info("QP Hessian is singular; adding {:g} I", opt_.regularization);
      h.diagonal().array() += opt_.regularization;
      sol.regularized = true;
    }
    Eigen::LLT<MatrixXd> llt(h);
    if (llt.info() != Eigen::Success) throw NumericalBreakdown("Cholesky factorization of QP Hessian failed");
    MatrixXd linv = llt.matrixL().solve(MatrixXd::Identity(n_, n_));
    J_ = linv.transpose();
    u_ = VectorXd::Zero(n_);
    active_.assign(n_, 0);
  }

  VectorXd dual_step(const VectorXd& d) const {
    if (q_ == 0) return VectorXd();
    return R_.topLeftCorner(q_, q_).triangularView<Eigen::Upper>().solve(d.head(q_));
  }

  bool add_active(VectorXd d, int code, double multiplier) {
    for (int j = n_ - 1; j > q_; --j) {
      const double a = d[j - 1];
      const double b = d[j];
      if (b == 0.0) continue;
      const double h = std::hypot(a, b);
      const double c = a / h;
      const double s = b / h;
      d[j - 1] = h;
      d[j] = 0.0;
      VectorXd cj1 = J_.col(j - 1);
      VectorXd cj = J_.col(j);
      J_.col(j - 1) = c * cj1 + s * cj;
      J_.col(j) = -s * cj1 + c * cj;
    }
    if (std::abs(d[q_]) <= 1e-12 * std::max(d.norm(), 1e-300)) return false;
    R_.col(q_).head(q_ + 1) = d.head(q_ + 1);
    active_[q_] = code;
    u_[q_] = multiplier;
    ++q_;
    return true;
  }

  void drop_active(int l) {
    for (int j = l; j < q_ - 1; ++j) {
      R_.col(j).head(q_) = R_.col(j + 1).head(q_);
      active_[j] = active_[j + 1];
      u_[j] = u_[j + 1];
    }
    R_.col(q_ - 1).setZero();
    for (int j = l; j < q_ - 1; ++j) {
      const double a = R_(j, j);
      const double b = R_(j + 1, j);
      if (b == 0.0) continue;
      const double h = std::hypot(a, b);
      const double c = a / h;
      const double s = b / h;
      for (int k = j; k < q_ - 1; ++k) {
        const double t1 = R_(j, k);
        const double t2 = R_(j + 1, k);
        R_(j, k) = c * t1 + s * t2;
        R_(j + 1, k) = -s * t1 + c * t2;
      }
      R_(j + 1, j) = 0.0;
      VectorXd cj = J_.col(j);
      VectorXd cj1 = J_.col(j + 1);
      J_.col(j) = c * cj + s * cj1;
      J_.col(j + 1) = -s * cj + c * cj1;
    }
    --q_;
    u_[q_] = 0.0;
    active_[q_] = 0;
  }

  QpSolution& finish(QpSolution& sol) {
    sol.x = x_;
    sol.objective = qp_.objective(x_);
    sol.duals_in = VectorXd::Zero(m_in_);
    sol.duals_lo = VectorXd::Zero(n_);
    sol.duals_hi = VectorXd::Zero(n_);
    if (sol.duals_eq.size() != qp_.A_eq.rows()) sol.duals_eq = VectorXd::Zero(qp_.A_eq.rows());
    sol.active_set.clear();
    for (int j = 0; j < q_; ++j) {
      const int code = active_[j];
      if (code < 0) {
        sol.duals_eq[-1 - code] = u_[j];
      } else if (code < m_in_) {
        sol.duals_in[code] = u_[j];
        sol.active_set.push_back(code);
      } else if (code < m_in_ + n_) {
        sol.duals_lo[code - m_in_] = u_[j];
        sol.active_set.push_back(code);
      } else {
        sol.duals_hi[code - m_in_ - n_] = u_[j];
        sol.active_set.push_back(code);
      }
    }
    if (sol.status == QpStatus::Optimal && sol.regularized && x_.size() > 0 &&
        x_.cwiseAbs().maxCoeff() > 1e8) {
      sol.status = QpStatus::Unbounded;
    }
    return sol;
  }

  const QuadraticProgram& qp_;
  const QpOptions& opt_;
  int n_ = 0;
  int m_in_ = 0;
  VectorXd lo_, hi_, row_norm_;
  MatrixXd J_, R_;
  VectorXd x_, u_;
  std::vector<int> active_;
  int q_ = 0;
};

}  // namespace

QpSolution solve_qp(const QuadraticProgram& qp, const QpOptions& options) {
  DualActiveSet solver(qp, options);
  return solver.run();
}

KktResiduals kkt_residuals(const QuadraticProgram& qp, const QpSolution& sol) {
  KktResiduals res;
  const int n = qp.num_vars();
  const VectorXd& x = sol.x;
  VectorXd grad = qp.Q * x + qp.c;
  if (qp.A_eq.rows() > 0) {
    grad -= qp.A_eq.transpose() * sol.duals_eq;
    res.primal = std::max(res.primal, (qp.A_eq * x - qp.b_eq).cwiseAbs().maxCoeff());
  }
  if (qp.A_in.rows() > 0) {
    grad += qp.A_in.transpose() * sol.duals_in;
    VectorXd slack = qp.b_in - qp.A_in * x;
    res.primal = std::max(res.primal, std::max(0.0, -slack.minCoeff()));
    res.complementarity =
        std::max(res.complementarity, (slack.array() * sol.duals_in.array()).abs().maxCoeff());
    res.dual_sign = std::max(res.dual_sign, std::max(0.0, -sol.duals_in.minCoeff()));
  }
  for (int i = 0; i < n; ++i) {
    if (qp.lo.size() == n && std::isfinite(qp.lo[i])) {
      res.primal = std::max(res.primal, qp.lo[i] - x[i]);
      res.complementarity = std::max(res.complementarity, std::abs((x[i] - qp.lo[i]) * sol.duals_lo[i]));
    }
    if (qp.hi.size() == n && std::isfinite(qp.hi[i])) {
      res.primal = std::max(res.primal, x[i] - qp.hi[i]);
      res.complementarity = std::max(res.complementarity, std::abs((qp.hi[i] - x[i]) * sol.duals_hi[i]));
    }
  }
  if (n > 0) {
    grad -= sol.duals_lo - sol.duals_hi;
    res.stationarity = grad.cwiseAbs().maxCoeff();
    res.dual_sign = std::max(res.dual_sign, std::max(0.0, -sol.duals_lo.minCoeff()));
    res.dual_sign = std::max(res.dual_sign, std::max(0.0, -sol.duals_hi.minCoeff()));
  }
  return res;
}

}  // namespace ccopf
