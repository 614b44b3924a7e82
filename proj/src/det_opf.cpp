#include "ccopf/det_opf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ccopf/errors.hpp"
#include "ccopf/log.hpp"
#include "ccopf/qp.hpp"

namespace ccopf {

double generation_cost(const Network& net, const VectorXd& p) {
  if (p.size() != net.num_generators()) throw DimensionMismatch("set-point vector has wrong length");
  double total = 0.0;
  for (int g = 0; g < net.num_generators(); ++g) total += net.generator(g).cost(p[g]);
  return total;
}

VectorXd dc_angles(const Network& net, const VectorXd& p) {
  return net.laplacian().apply_reduced_inverse(net.bus_generation(p) + net.wind_mean() - net.demand());
}

namespace {

// DC-OPF with a per-line bound on |theta_i - theta_j|.
OpfResult angle_bounded_opf(const Network& net, const VectorXd& angle_bound) {
  const int n_gen = net.num_generators();
  const int m = net.num_lines();
  const MatrixXd& b_red = net.laplacian().reduced_inverse();
  const MatrixXd sens = b_red * net.generator_map();
  const VectorXd base = b_red * (net.wind_mean() - net.demand());

  QuadraticProgram qp;
  qp.Q = MatrixXd::Zero(n_gen, n_gen);
  qp.c = VectorXd(n_gen);
  qp.lo = VectorXd(n_gen);
  qp.hi = VectorXd(n_gen);
  for (int g = 0; g < n_gen; ++g) {
    const auto& gen = net.generator(g);
    qp.Q(g, g) = 2.0 * gen.c1;
    qp.c[g] = gen.c2;
    qp.lo[g] = gen.p_min;
    qp.hi[g] = gen.p_max;
  }
  qp.A_eq = MatrixXd::Ones(1, n_gen);
  qp.b_eq = VectorXd::Constant(1, (net.demand() - net.wind_mean()).sum());
  qp.A_in = MatrixXd(2 * m, n_gen);
  qp.b_in = VectorXd(2 * m);
  for (int k = 0; k < m; ++k) {
    const auto& l = net.line(k);
    const Eigen::RowVectorXd row = sens.row(l.from) - sens.row(l.to);
    const double h = base[l.from] - base[l.to];
    qp.A_in.row(k) = row;
    qp.b_in[k] = angle_bound[k] - h;
    qp.A_in.row(m + k) = -row;
    qp.b_in[m + k] = angle_bound[k] + h;
  }
  QpSolution sol = solve_qp(qp);
  if (sol.status == QpStatus::Infeasible) throw Infeasible("no dispatch satisfies balance, bounds and line limits");
  if (sol.status != QpStatus::Optimal) {
    throw NumericalBreakdown(std::string("dispatch QP ended with status ") + std::string(to_string(sol.status)));
  }

  OpfResult out;
  out.dispatch.p = sol.x;
  out.dispatch.alpha = VectorXd::Zero(n_gen);
  out.theta = dc_angles(net, sol.x);
  out.flows = VectorXd(m);
  out.line_duals = VectorXd(m);
  for (int k = 0; k < m; ++k) {
    const auto& l = net.line(k);
    out.flows[k] = l.beta * (out.theta[l.from] - out.theta[l.to]);
    out.line_duals[k] = sol.duals_in[k] - sol.duals_in[m + k];
  }
  out.objective = generation_cost(net, sol.x);
  out.qp_iterations = sol.iterations;
  return out;
}

}  // namespace

OpfResult solve_dc_opf(const Network& net) {
  VectorXd bound(net.num_lines());
  for (int k = 0; k < net.num_lines(); ++k) bound[k] = net.line(k).pbar / net.line(k).beta;
  return angle_bounded_opf(net, bound);
}

OpfResult solve_scopf(const Network& net, const ScopfOptions& opt) {
  VectorXd bound(net.num_lines());
  for (int k = 0; k < net.num_lines(); ++k) bound[k] = net.effective_capacity(k) - opt.margin;
  OpfResult out = angle_bounded_opf(net, bound);

  Dispatch d{out.dispatch.p, out.dispatch.alpha};
  const VectorXd q = injection_vector(net, d, VectorXd::Zero(net.num_buses()));
  PfOptions pf;
  pf.margin = opt.margin;
  out.recovery = solve_pf(net, q, pf);
  out.sync_recovered = out.recovery->feasible;
  if (!out.sync_recovered) {
    if (opt.strict_recovery) throw SyncRecoveryFailed("SCOPF injections admit no synchronous flow within limits");
    log().warn("SCOPF dispatch has no synchronous flow within limits");
  }
  return out;
}

double barrier_d(const Network& net, double epsilon, double c) {
  return c * epsilon / (std::numbers::pi * net.beta_max());
}

double barrier_phi(const Network& net, double epsilon) {
  return net.beta_max() / (net.num_lines() * std::log(1.0 / epsilon));
}

bool slacksine_holds(const Network& net, const VectorXd& rho, double epsilon) {
  for (int k = 0; k < net.num_lines(); ++k) {
    if (std::abs(rho[k]) > (1.0 - epsilon) * net.effective_capacity(k)) return false;
  }
  return true;
}

namespace {

struct BarrierProblem {
  int n_gen = 0;
  int m = 0;
  int nv = 0;
  MatrixXd a_eq;  // conservation rows and fixed generators
  VectorXd b_eq;
  MatrixXd g_in;  // g_in x <= h_in
  VectorXd h_in;
  VectorXd beta;
  VectorXd c1, c2, c3;
  double d = 0.0;
  double phi = 0.0;

  int rho(int k) const { return n_gen + k; }
  int delta(int k) const { return n_gen + m + k; }

  bool in_domain(const VectorXd& x) const {
    for (int k = 0; k < m; ++k) {
      if (!(x[delta(k)] > 0.0) || !(std::abs(x[rho(k)]) < 1.0)) return false;
    }
    return ((h_in - g_in * x).array() > 0.0).all();
  }

  double objective(const VectorXd& x) const {
    double f = 0.0;
    for (int g = 0; g < n_gen; ++g) f += c1[g] * x[g] * x[g] + c2[g] * x[g] + c3[g];
    for (int k = 0; k < m; ++k) f += d * beta[k] * (psi(x[rho(k)]) - phi * std::log(x[delta(k)]));
    return f;
  }

  double merit(const VectorXd& x, double mu) const {
    if (!in_domain(x)) return std::numeric_limits<double>::infinity();
    return objective(x) - mu * (h_in - g_in * x).array().log().sum();
  }
};

BarrierProblem build_barrier_problem(const Network& net, double d, double phi) {
  BarrierProblem bp;
  bp.n_gen = net.num_generators();
  bp.m = net.num_lines();
  bp.nv = bp.n_gen + 2 * bp.m;
  bp.d = d;
  bp.phi = phi;
  const int n = net.num_buses();

  std::vector<int> fixed;
  std::vector<int> free;
  for (int g = 0; g < bp.n_gen; ++g) {
    const auto& gen = net.generator(g);
    (gen.p_max - gen.p_min <= 1e-12 * std::max(1.0, std::abs(gen.p_max)) ? fixed : free).push_back(g);
  }

  bp.a_eq = MatrixXd::Zero(n + fixed.size(), bp.nv);
  bp.b_eq = VectorXd::Zero(n + fixed.size());
  for (int g = 0; g < bp.n_gen; ++g) bp.a_eq(net.generator(g).bus, g) -= 1.0;
  bp.beta = VectorXd(bp.m);
  for (int k = 0; k < bp.m; ++k) {
    const auto& l = net.line(k);
    bp.beta[k] = l.beta;
    bp.a_eq(l.from, bp.rho(k)) += l.beta;
    bp.a_eq(l.to, bp.rho(k)) -= l.beta;
  }
  bp.b_eq.head(n) = net.wind_mean() - net.demand();
  for (std::size_t r = 0; r < fixed.size(); ++r) {
    bp.a_eq(n + r, fixed[r]) = 1.0;
    bp.b_eq[n + r] = net.generator(fixed[r]).p_min;
  }

  const int n_in = 2 * bp.m + 2 * static_cast<int>(free.size());
  bp.g_in = MatrixXd::Zero(n_in, bp.nv);
  bp.h_in = VectorXd(n_in);
  for (int k = 0; k < bp.m; ++k) {
    const double u = net.effective_capacity(k);
    bp.g_in(2 * k, bp.rho(k)) = 1.0;
    bp.g_in(2 * k, bp.delta(k)) = u;
    bp.h_in[2 * k] = u;
    bp.g_in(2 * k + 1, bp.rho(k)) = -1.0;
    bp.g_in(2 * k + 1, bp.delta(k)) = u;
    bp.h_in[2 * k + 1] = u;
  }
  int r = 2 * bp.m;
  for (int g : free) {
    bp.g_in(r, g) = 1.0;
    bp.h_in[r++] = net.generator(g).p_max;
    bp.g_in(r, g) = -1.0;
    bp.h_in[r++] = -net.generator(g).p_min;
  }

  bp.c1 = VectorXd(bp.n_gen);
  bp.c2 = VectorXd(bp.n_gen);
  bp.c3 = VectorXd(bp.n_gen);
  for (int g = 0; g < bp.n_gen; ++g) {
    bp.c1[g] = net.generator(g).c1;
    bp.c2[g] = net.generator(g).c2;
    bp.c3[g] = net.generator(g).c3;
  }
  return bp;
}

// A point with every inequality strict: shrink the capacities and generator
// ranges by tau and center the set points.
std::optional<VectorXd> strict_start(const Network& net, const BarrierProblem& bp, double tau,
                                     bool interior = true) {
  const int n_gen = bp.n_gen;
  const int m = bp.m;
  QuadraticProgram qp;
  qp.Q = MatrixXd::Identity(n_gen + m, n_gen + m);
  qp.c = VectorXd::Zero(n_gen + m);
  qp.lo = VectorXd(n_gen + m);
  qp.hi = VectorXd(n_gen + m);
  for (int g = 0; g < n_gen; ++g) {
    const auto& gen = net.generator(g);
    const double range = gen.p_max - gen.p_min;
    const double scale = std::max(range, 1e-6);
    qp.Q(g, g) = 1.0 / (scale * scale);
    qp.c[g] = -0.5 * (gen.p_min + gen.p_max) / (scale * scale);
    qp.lo[g] = gen.p_min + tau * range;
    qp.hi[g] = gen.p_max - tau * range;
  }
  for (int k = 0; k < m; ++k) {
    qp.lo[n_gen + k] = -(1.0 - tau) * net.effective_capacity(k);
    qp.hi[n_gen + k] = (1.0 - tau) * net.effective_capacity(k);
  }
  qp.A_eq = bp.a_eq.leftCols(n_gen + m);
  qp.b_eq = bp.b_eq;
  QpSolution sol = solve_qp(qp);
  if (sol.status != QpStatus::Optimal) return std::nullopt;

  VectorXd x(bp.nv);
  x.head(n_gen + m) = sol.x;
  for (int k = 0; k < m; ++k) {
    x[bp.delta(k)] = 0.5 * (1.0 - std::abs(sol.x[n_gen + k]) / net.effective_capacity(k));
  }
  if (interior && !bp.in_domain(x)) return std::nullopt;
  return x;
}

}  // namespace

BarrierResult solve_barrier_opf(const Network& net, const BarrierConfig& cfg) {
  if (!(cfg.epsilon > 0.0 && cfg.epsilon < 1.0)) throw DomainError("barrier tolerance must lie in (0, 1)");
  if (net.num_lines() == 0) throw DomainError("barrier OPF needs at least one line");

  BarrierResult out;
  double c = cfg.cost_lower_bound ? *cfg.cost_lower_bound : solve_dc_opf(net).objective;
  if (!(c > 0.0)) {
    log().warn("cost lower bound {:g} is not positive, using 1e-3", c);
    c = 1e-3;
  }
  out.C = c;
  out.D = barrier_d(net, cfg.epsilon, c);
  out.phi = barrier_phi(net, cfg.epsilon);
  const BarrierProblem bp = build_barrier_problem(net, out.D, out.phi);
  const int nv = bp.nv;
  const int n_eq = static_cast<int>(bp.a_eq.rows());
  const int n_in = static_cast<int>(bp.g_in.rows());

  std::optional<VectorXd> start;
  for (double tau : {0.05, 1e-3, 1e-6}) {
    start = strict_start(net, bp, tau);
    if (start) break;
  }
  if (!start) {
    if (!strict_start(net, bp, 0.0, false)) throw Infeasible("no flow satisfies conservation within the capacities");
    throw BarrierDivergence("the capacity constraints admit no strictly interior flow");
  }
  VectorXd x = *start;

  double beta_min = bp.beta.minCoeff();
  const double gap_target = 1e-9 * out.D * out.phi * beta_min;
  const double ceiling = cfg.divergence_factor * c;
  double mu = std::max(std::abs(bp.objective(x)), 1.0) / n_in;
  VectorXd w = VectorXd::Zero(n_eq);
  int stage = 0;
  int total = 0;

  auto newton_system = [&](const VectorXd& xv, double mu_v, VectorXd& grad, MatrixXd& kkt) {
    const VectorXd inv_s = (bp.h_in - bp.g_in * xv).cwiseInverse();
    grad = VectorXd::Zero(nv);
    VectorXd hdiag = VectorXd::Zero(nv);
    for (int g = 0; g < bp.n_gen; ++g) {
      grad[g] = 2.0 * bp.c1[g] * xv[g] + bp.c2[g];
      hdiag[g] = 2.0 * bp.c1[g];
    }
    for (int k = 0; k < bp.m; ++k) {
      const double r = xv[bp.rho(k)];
      const double dl = xv[bp.delta(k)];
      const double s = out.D * bp.beta[k];
      grad[bp.rho(k)] = s * std::asin(r);
      hdiag[bp.rho(k)] = s / std::sqrt(1.0 - r * r);
      grad[bp.delta(k)] = -s * out.phi / dl;
      hdiag[bp.delta(k)] = s * out.phi / (dl * dl);
    }
    grad += mu_v * bp.g_in.transpose() * inv_s;
    kkt = MatrixXd::Zero(nv + n_eq, nv + n_eq);
    kkt.topLeftCorner(nv, nv) = mu_v * bp.g_in.transpose() * inv_s.cwiseAbs2().asDiagonal() * bp.g_in;
    kkt.topLeftCorner(nv, nv).diagonal() += hdiag;
    kkt.topRightCorner(nv, n_eq) = bp.a_eq.transpose();
    kkt.bottomLeftCorner(n_eq, nv) = bp.a_eq;
  };

  for (;;) {
    // Centering by equality-constrained Newton on the barrier merit.
    for (int it = 0;; ++it) {
      if (total >= cfg.max_newton) throw NoConvergence("barrier Newton iteration limit reached");
      VectorXd grad;
      MatrixXd kkt;
      newton_system(x, mu, grad, kkt);
      VectorXd rhs(nv + n_eq);
      rhs.head(nv) = -grad;
      rhs.tail(n_eq) = bp.b_eq - bp.a_eq * x;
      Eigen::PartialPivLU<MatrixXd> lu(kkt);
      const VectorXd sol = lu.solve(rhs);
      const VectorXd dx = sol.head(nv);
      w = sol.tail(n_eq);
      const double dec = -grad.dot(dx);
      const double phi0 = bp.merit(x, mu);
      if (dec <= 1e-3 * mu && it > 0) break;

      double t = 1.0;
      const VectorXd gdx = bp.g_in * dx;
      const VectorXd slack = bp.h_in - bp.g_in * x;
      for (int i = 0; i < n_in; ++i) {
        if (gdx[i] > 0.0) t = std::min(t, 0.99 * slack[i] / gdx[i]);
      }
      for (int k = 0; k < bp.m; ++k) {
        const double dd = dx[bp.delta(k)];
        if (dd < 0.0) t = std::min(t, -0.99 * x[bp.delta(k)] / dd);
      }
      if (dec > 1e-14 * (1.0 + std::abs(phi0))) {
        while (t > 1e-16 && !(bp.merit(x + t * dx, mu) <= phi0 - 1e-4 * t * dec)) t *= 0.5;
      }
      if (t <= 1e-16) break;
      x += t * dx;
      ++total;
      out.merit.push_back(bp.merit(x, mu));
      out.merit_stage.push_back(stage);
      if (dec <= 1e-3 * mu && t == 1.0) break;
    }
    const double f = bp.objective(x);
    out.path.push_back(f);
    log().debug("barrier stage {} mu {:g} objective {:.12g}", stage, mu, f);
    if (f > ceiling) throw BarrierDivergence("barrier objective exceeds " + std::to_string(ceiling));
    if (mu * n_in <= gap_target) break;
    mu = std::max(mu / 10.0, 0.5 * gap_target / n_in);
    ++stage;
  }
  out.newton_iterations = total;

  out.dispatch.p = x.head(bp.n_gen);
  out.dispatch.alpha = VectorXd::Zero(bp.n_gen);
  out.rho = x.segment(bp.n_gen, bp.m);
  out.delta = x.tail(bp.m);
  out.cost = generation_cost(net, out.dispatch.p);
  out.objective = bp.objective(x);
  const int n = net.num_buses();
  const int slack = net.slack();
  out.theta = VectorXd(n);
  for (int i = 0; i < n; ++i) out.theta[i] = -(w[i] - w[slack]) / out.D;

  out.cost_bound = out.objective + out.D * (std::numbers::pi / 2.0 - 1.0) * bp.beta.sum();
  out.cost_bound_holds = out.cost <= out.cost_bound + 1e-8 * std::max(1.0, std::abs(out.cost));
  try {
    const VectorXd q = injection_vector(net, out.dispatch, VectorXd::Zero(n));
    out.sync_feasible = solve_pf(net, q).feasible;
  } catch (const Error& e) {
    log().warn("angle recovery on the barrier dispatch failed: {}", e.what());
  }

  out.separation = std::numeric_limits<double>::infinity();
  for (int k = 0; k < bp.m; ++k) {
    out.separation = std::min(out.separation, 1.0 - std::abs(out.rho[k]) / net.effective_capacity(k));
  }
  out.residual = VectorXd(bp.m);
  out.residual_bound = VectorXd(bp.m);
  out.residual_within_bound = out.separation > 0.0;
  for (int k = 0; k < bp.m; ++k) {
    const auto& l = net.line(k);
    out.residual[k] = std::abs(std::asin(out.rho[k]) - (out.theta[l.from] - out.theta[l.to]));
    out.residual_bound[k] = out.phi / (net.effective_capacity(k) * out.separation);
    if (out.residual[k] > out.residual_bound[k] * (1.0 + 1e-6) + 1e-12) out.residual_within_bound = false;
  }

  try {
    OpfResult ref = solve_scopf(net);
    if (ref.sync_recovered) {
      out.reference_cost = ref.objective;
      out.guarantee_applies = slacksine_holds(net, ref.recovery->rho, cfg.epsilon);
    }
  } catch (const Error& e) {
    log().info("no SCOPF reference for the barrier solve: {}", e.what());
  }
  return out;
}

}  // namespace ccopf
