#include "ccopf/ld_risk.hpp"

#include <cmath>
#include <limits>

#include "ccopf/errors.hpp"
#include "ccopf/log.hpp"

namespace ccopf {

namespace {

void check_line(const Network& net, const Dispatch& d, int line) {
  if (line < 0 || line >= net.num_lines()) throw DomainError("line index out of range");
  if (d.p.size() != net.num_generators() || d.alpha.size() != net.num_generators()) {
    throw DimensionMismatch("dispatch does not match generator count");
  }
}

// Mean injections and the response of every bus to each wind source:
// q = q0 + R omega with R = I_wind - alpha_bus 1'.
void injection_model(const Network& net, const Dispatch& d, VectorXd& q0, MatrixXd& r) {
  q0 = net.bus_generation(d.p) + net.wind_mean() - net.demand();
  const VectorXd a = net.bus_generation(d.alpha);
  const auto& wind = net.wind_buses();
  r = MatrixXd(net.num_buses(), wind.size());
  for (std::size_t k = 0; k < wind.size(); ++k) {
    r.col(k) = -a;
    r(wind[k], k) += 1.0;
  }
}

}  // namespace

InstantonResult e_dc_closed_form(const Network& net, const Dispatch& d, int line, double rho_threshold) {
  check_line(net, d, line);
  VectorXd q0;
  MatrixXd r;
  injection_model(net, d, q0, r);
  const MatrixXd& b_red = net.laplacian().reduced_inverse();
  const auto& l = net.line(line);
  const Eigen::RowVectorXd diff = b_red.row(l.from) - b_red.row(l.to);
  const double mean = diff.dot(q0);
  const VectorXd c = (diff * r).transpose();
  const VectorXd var = net.wind_sigma()(net.wind_buses()).cwiseAbs2();

  InstantonResult out;
  const double gap = rho_threshold / l.beta - mean;
  const double denom = (var.array() * c.array().square()).sum();
  out.omega = VectorXd::Zero(var.size());
  if (!(denom > 0.0)) {
    out.status = InstantonStatus::ZeroVariance;
    out.energy = gap == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    out.residual = std::abs(gap);
    return out;
  }
  out.phi = gap / denom;
  out.omega = out.phi * var.cwiseProduct(c);
  out.energy = gap * gap / (2.0 * denom);
  out.residual = std::abs(c.dot(out.omega) - gap);
  return out;
}

bool ld_condition_check(double energy, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw DomainError("epsilon must lie in (0, 1)");
  return energy >= std::log(1.0 / epsilon);
}

InstantonResult nonlinear_instanton(const Network& net, const Dispatch& d, int line, double rho_threshold,
                                    const InstantonOptions& opt) {
  check_line(net, d, line);
  const auto& target = net.line(line);
  if (!(std::abs(rho_threshold) < target.beta)) {
    throw DomainError("threshold is beyond the line's maximal sine flow");
  }
  InstantonResult dc = e_dc_closed_form(net, d, line, rho_threshold);
  if (dc.status == InstantonStatus::ZeroVariance) return dc;

  const int n = net.num_buses();
  const int slack = net.slack();
  const int nr = n - 1;
  const int nw = static_cast<int>(net.wind_buses().size());
  auto red = [slack](int i) { return i < slack ? i : i - 1; };

  VectorXd q0;
  MatrixXd r_full;
  injection_model(net, d, q0, r_full);
  MatrixXd r(nr, nw);
  VectorXd q0r(nr);
  for (int i = 0; i < n; ++i) {
    if (i == slack) continue;
    r.row(red(i)) = r_full.row(i);
    q0r[red(i)] = q0[i];
  }
  const VectorXd var = net.wind_sigma()(net.wind_buses()).cwiseAbs2();

  // Unknowns z = (theta without slack, omega, lambda, mu).
  const int dim = nr + nw + nr + 1;
  auto theta_full = [&](const VectorXd& z) {
    VectorXd th = VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
      if (i != slack) th[i] = z[red(i)];
    }
    return th;
  };

  auto residual_and_jacobian = [&](const VectorXd& z, VectorXd& res, MatrixXd* jac) {
    const VectorXd th = theta_full(z);
    const VectorXd omega = z.segment(nr, nw);
    const VectorXd lam = z.segment(nr + nw, nr);
    const double mu = z[dim - 1];
    auto lam_at = [&](int i) { return i == slack ? 0.0 : lam[red(i)]; };

    VectorXd flow_res = -q0r - r * omega;
    VectorXd grad_lag = VectorXd::Zero(nr);  // J' lambda
    MatrixXd jf = MatrixXd::Zero(nr, nr);
    MatrixXd hl = MatrixXd::Zero(nr, nr);
    for (const auto& l : net.lines()) {
      const double dd = th[l.from] - th[l.to];
      const double s = l.beta * std::sin(dd);
      const double c = l.beta * std::cos(dd);
      const double dl = lam_at(l.from) - lam_at(l.to);
      const bool a = l.from != slack;
      const bool b = l.to != slack;
      if (a) {
        flow_res[red(l.from)] += s;
        grad_lag[red(l.from)] += c * dl;
        jf(red(l.from), red(l.from)) += c;
        hl(red(l.from), red(l.from)) -= s * dl;
      }
      if (b) {
        flow_res[red(l.to)] -= s;
        grad_lag[red(l.to)] -= c * dl;
        jf(red(l.to), red(l.to)) += c;
        hl(red(l.to), red(l.to)) -= s * dl;
      }
      if (a && b) {
        jf(red(l.from), red(l.to)) -= c;
        jf(red(l.to), red(l.from)) -= c;
        hl(red(l.from), red(l.to)) += s * dl;
        hl(red(l.to), red(l.from)) += s * dl;
      }
    }
    const double dt = th[target.from] - th[target.to];
    VectorXd grad_t = VectorXd::Zero(nr);
    if (target.from != slack) grad_t[red(target.from)] += target.beta * std::cos(dt);
    if (target.to != slack) grad_t[red(target.to)] -= target.beta * std::cos(dt);

    res.resize(dim);
    res.head(nr) = -grad_lag - mu * grad_t;
    res.segment(nr, nw) = omega.cwiseQuotient(var) + r.transpose() * lam;
    res.segment(nr + nw, nr) = flow_res;
    res[dim - 1] = target.beta * std::sin(dt) - rho_threshold;
    if (!jac) return;

    MatrixXd hess_t = MatrixXd::Zero(nr, nr);
    {
      const double s = -target.beta * std::sin(dt);
      const bool a = target.from != slack;
      const bool b = target.to != slack;
      if (a) hess_t(red(target.from), red(target.from)) += s;
      if (b) hess_t(red(target.to), red(target.to)) += s;
      if (a && b) {
        hess_t(red(target.from), red(target.to)) -= s;
        hess_t(red(target.to), red(target.from)) -= s;
      }
    }
    MatrixXd& j = *jac;
    j = MatrixXd::Zero(dim, dim);
    j.block(0, 0, nr, nr) = -hl - mu * hess_t;
    j.block(0, nr + nw, nr, nr) = -jf.transpose();
    j.block(0, dim - 1, nr, 1) = -grad_t;
    j.block(nr, nr, nw, nw) = var.cwiseInverse().asDiagonal();
    j.block(nr, nr + nw, nw, nr) = r.transpose();
    j.block(nr + nw, 0, nr, nr) = jf;
    j.block(nr + nw, nr, nr, nw) = -r;
    j.block(dim - 1, 0, 1, nr) = grad_t.transpose();
  };

  // Start at the DC instanton with multipliers from a least-squares fit.
  VectorXd z = VectorXd::Zero(dim);
  {
    const VectorXd th = net.laplacian().apply_reduced_inverse(q0 + r_full * dc.omega);
    for (int i = 0; i < n; ++i) {
      if (i != slack) z[red(i)] = th[i];
    }
    z.segment(nr, nw) = dc.omega;
    VectorXd res;
    MatrixXd jac;
    residual_and_jacobian(z, res, &jac);
    MatrixXd a(nr + nw, nr + 1);
    a << jac.block(0, nr + nw, nr, nr), jac.block(0, dim - 1, nr, 1), jac.block(nr, nr + nw, nw, nr),
        MatrixXd::Zero(nw, 1);
    VectorXd rhs(nr + nw);
    rhs << VectorXd::Zero(nr), -dc.omega.cwiseQuotient(var);
    const VectorXd mult = a.completeOrthogonalDecomposition().solve(rhs);
    z.segment(nr + nw, nr) = mult.head(nr);
    z[dim - 1] = mult[nr];
  }

  VectorXd res;
  MatrixXd jac;
  int it = 0;
  bool converged = false;
  for (; it < opt.max_iter; ++it) {
    residual_and_jacobian(z, res, &jac);
    const double norm = res.cwiseAbs().maxCoeff();
    if (norm <= opt.tol) {
      converged = true;
      break;
    }
    const VectorXd step = jac.fullPivLu().solve(-res);
    double t = 1.0;
    for (; t > 1e-10; t *= 0.5) {
      VectorXd trial_res;
      residual_and_jacobian(z + t * step, trial_res, nullptr);
      if (trial_res.norm() < (1.0 - 1e-4 * t) * res.norm()) break;
    }
    if (t <= 1e-10) t = 1.0;
    z += t * step;
  }
  if (!converged) throw NoConvergence("instanton Newton iteration did not converge");

  InstantonResult out;
  out.omega = z.segment(nr, nw);
  out.energy = 0.5 * out.omega.cwiseAbs2().cwiseQuotient(var).sum();
  out.phi = z[dim - 1];
  out.residual = std::max(res.segment(nr + nw, nr).cwiseAbs().maxCoeff(), std::abs(res[dim - 1]));
  out.iterations = it;

  const VectorXd th = theta_full(z);
  for (const auto& l : net.lines()) {
    if (std::abs(th[l.from] - th[l.to]) >= M_PI / 2.0) {
      log().warn("instanton angles leave the stable region on a line");
      break;
    }
  }
  return out;
}

}  // namespace ccopf
