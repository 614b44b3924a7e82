#include "ccopf/pf.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ccopf/errors.hpp"
#include "ccopf/log.hpp"
#include "ccopf/qp.hpp"

namespace ccopf {

double psi(double x) {
  if (!(std::abs(x) <= 1.0)) throw DomainError("psi is defined on [-1, 1]");
  return x * std::asin(x) + std::sqrt(1.0 - x * x) - std::numbers::pi / 2.0;
}

VectorXd conservation_residual(const Network& net, const VectorXd& rho, const VectorXd& injections) {
  VectorXd r = -injections;
  for (int k = 0; k < net.num_lines(); ++k) {
    const auto& l = net.line(k);
    r[l.from] += l.beta * rho[k];
    r[l.to] -= l.beta * rho[k];
  }
  return r;
}

namespace {

void check_injections(const Network& net, const VectorXd& q) {
  if (q.size() != net.num_buses()) throw DimensionMismatch("injection vector has wrong length");
  const double scale = std::max(1.0, q.cwiseAbs().maxCoeff());
  if (std::abs(q.sum()) > 1e-9 * scale) {
    throw UnbalancedInjections("injections sum to " + std::to_string(q.sum()));
  }
}

double flow_objective(const Network& net, const VectorXd& rho) {
  double f = 0.0;
  for (int k = 0; k < net.num_lines(); ++k) f += net.line(k).beta * psi(rho[k]);
  return f;
}

}  // namespace

FlowState solve_pf(const Network& net, const VectorXd& injections, const PfOptions& opt) {
  check_injections(net, injections);
  const int n = net.num_buses();
  const int m = net.num_lines();
  const int slack = net.slack();

  VectorXd bound(m);
  VectorXd beta(m);
  for (int k = 0; k < m; ++k) {
    bound[k] = (opt.thermal_cap ? net.effective_capacity(k) : 1.0) - opt.margin;
    beta[k] = net.line(k).beta;
  }

  VectorXd theta_dc = net.laplacian().apply_reduced_inverse(injections);
  VectorXd rho_dc(m);
  for (int k = 0; k < m; ++k) rho_dc[k] = theta_dc[net.line(k).from] - theta_dc[net.line(k).to];

  // Conservation rows for every bus except the slack (that row is implied).
  MatrixXd cons = MatrixXd::Zero(n - 1, m);
  VectorXd rhs(n - 1);
  auto row_of = [slack](int i) { return i < slack ? i : i - 1; };
  for (int i = 0; i < n; ++i) {
    if (i != slack) rhs[row_of(i)] = injections[i];
  }
  for (int k = 0; k < m; ++k) {
    const auto& l = net.line(k);
    if (l.from != slack) cons(row_of(l.from), k) += l.beta;
    if (l.to != slack) cons(row_of(l.to), k) -= l.beta;
  }

  FlowState out;
  out.at_bound.assign(m, 0);

  VectorXd rho = rho_dc;
  if ((rho_dc.cwiseAbs().array() > bound.array()).any()) {
    QuadraticProgram proj;
    proj.Q = MatrixXd::Identity(m, m);
    proj.c = -rho_dc;
    proj.A_eq = cons;
    proj.b_eq = rhs;
    proj.lo = -bound;
    proj.hi = bound;
    QpSolution s = solve_qp(proj);
    if (s.status != QpStatus::Optimal) {
      out.rho = rho_dc;
      out.theta = theta_dc;
      out.boundary_hit = true;
      for (int k = 0; k < m; ++k) out.at_bound[k] = std::abs(rho_dc[k]) >= bound[k];
      return out;
    }
    rho = s.x.cwiseMax(-bound).cwiseMin(bound);
  }

  // Sequential QP with the exact (diagonal) Hessian of sum beta psi.
  QpOptions qopt;
  QpSolution step;
  bool converged = false;
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    VectorXd grad(m);
    VectorXd hess(m);
    for (int k = 0; k < m; ++k) {
      grad[k] = beta[k] * std::asin(rho[k]);
      hess[k] = beta[k] / std::sqrt(1.0 - rho[k] * rho[k]);
    }
    QuadraticProgram sub;
    sub.Q = hess.asDiagonal();
    sub.c = grad;
    sub.A_eq = cons;
    sub.b_eq = VectorXd::Zero(n - 1);
    sub.lo = -bound - rho;
    sub.hi = bound - rho;
    step = solve_qp(sub, qopt);
    if (step.status != QpStatus::Optimal) {
      throw NoConvergence(std::string("power flow subproblem: ") + std::string(to_string(step.status)));
    }
    qopt.warm_start = step.active_set;
    const VectorXd& d = step.x;
    const double dn = d.cwiseAbs().maxCoeff();
    if (dn <= 1e-14) {
      converged = true;
      break;
    }
    const double f0 = flow_objective(net, rho);
    const double slope = grad.dot(d);
    double t = 1.0;
    if (-slope > 1e-14 * (1.0 + std::abs(f0))) {
      while (t > 1e-12) {
        VectorXd trial = (rho + t * d).cwiseMax(-bound).cwiseMin(bound);
        if (flow_objective(net, trial) <= f0 + 1e-4 * t * slope) break;
        t *= 0.5;
      }
    }
    rho = (rho + t * d).cwiseMax(-bound).cwiseMin(bound);
    if (t == 1.0 && dn <= 1e-11) {
      // One more pass refreshes the multipliers at the new point.
      continue;
    }
  }
  if (!converged) {
    if (step.x.size() == 0 || step.x.cwiseAbs().maxCoeff() > 1e-10) {
      throw NoConvergence("power flow Newton iteration did not converge");
    }
    log().debug("solve_pf accepted step norm {:g} at iteration cap", step.x.cwiseAbs().maxCoeff());
  }

  out.rho = rho;
  out.iterations = it;
  out.objective = flow_objective(net, rho);
  out.theta = VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    if (i != slack) out.theta[i] = step.duals_eq[row_of(i)];
  }
  for (int k = 0; k < m; ++k) {
    const double mult = step.duals_lo[k] + step.duals_hi[k];
    out.at_bound[k] = mult / beta[k] > 1e-9;
    if (out.at_bound[k]) out.boundary_hit = true;
  }
  out.feasible = !out.boundary_hit;
  return out;
}

double energy_function(const Network& net, const VectorXd& theta, const VectorXd& injections) {
  double e = -theta.dot(injections);
  for (const auto& l : net.lines()) e += l.beta * (1.0 - std::cos(theta[l.from] - theta[l.to]));
  return e;
}

FlowState energy_function_solve(const Network& net, const VectorXd& injections, const EnergyOptions& opt) {
  check_injections(net, injections);
  const int n = net.num_buses();
  const int slack = net.slack();
  auto idx = [slack](int i) { return i < slack ? i : i - 1; };

  VectorXd theta = VectorXd::Zero(n);
  const double scale = std::max(1.0, injections.cwiseAbs().maxCoeff());
  int it = 0;
  bool converged = false;
  for (; it < opt.max_iter; ++it) {
    VectorXd grad = VectorXd::Zero(n - 1);
    MatrixXd hess = MatrixXd::Zero(n - 1, n - 1);
    for (int i = 0; i < n; ++i) {
      if (i != slack) grad[idx(i)] -= injections[i];
    }
    for (const auto& l : net.lines()) {
      const double diff = theta[l.from] - theta[l.to];
      const double s = l.beta * std::sin(diff);
      const double c = l.beta * std::cos(diff);
      const bool f = l.from != slack;
      const bool t = l.to != slack;
      if (f) {
        grad[idx(l.from)] += s;
        hess(idx(l.from), idx(l.from)) += c;
      }
      if (t) {
        grad[idx(l.to)] -= s;
        hess(idx(l.to), idx(l.to)) += c;
      }
      if (f && t) {
        hess(idx(l.from), idx(l.to)) -= c;
        hess(idx(l.to), idx(l.from)) -= c;
      }
    }
    if (n == 1 || grad.cwiseAbs().maxCoeff() <= opt.tol * scale) {
      converged = true;
      break;
    }
    // Levenberg shift until the model Hessian is positive definite.
    double shift = 0.0;
    const double diag = std::max(1e-12, hess.diagonal().cwiseAbs().maxCoeff());
    Eigen::LLT<MatrixXd> llt;
    for (;;) {
      MatrixXd h = hess;
      h.diagonal().array() += shift;
      llt.compute(h);
      if (llt.info() == Eigen::Success) break;
      shift = shift == 0.0 ? 1e-6 * diag : 10.0 * shift;
      if (shift > 1e12 * diag) throw NumericalBreakdown("energy function Hessian cannot be shifted");
    }
    VectorXd dir = -llt.solve(grad);
    VectorXd full = VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
      if (i != slack) full[i] = dir[idx(i)];
    }
    const double e0 = energy_function(net, theta, injections);
    const double slope = grad.dot(dir);
    double t = 1.0;
    // Near the minimizer energy differences drown in rounding; take the Newton step.
    if (shift > 0.0 || -slope > 1e-10 * (1.0 + std::abs(e0))) {
      while (t > 1e-14) {
        if (energy_function(net, theta + t * full, injections) <= e0 + 1e-4 * t * slope) break;
        t *= 0.5;
      }
      if (t <= 1e-14) t = 1.0;
    }
    theta += t * full;
  }
  if (!converged) throw NoConvergence("energy function minimization did not converge");

  FlowState out;
  out.theta = theta;
  out.rho = VectorXd(net.num_lines());
  out.at_bound.assign(net.num_lines(), 0);
  out.feasible = true;
  for (int k = 0; k < net.num_lines(); ++k) {
    const double diff = theta[net.line(k).from] - theta[net.line(k).to];
    out.rho[k] = std::sin(diff);
    if (std::abs(diff) >= std::numbers::pi / 2.0) out.feasible = false;
  }
  out.objective = energy_function(net, theta, injections);
  out.iterations = it;
  return out;
}

}  // namespace ccopf
