#include "ccopf/cc_opf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ccopf/errors.hpp"
#include "ccopf/gaussian.hpp"
#include "ccopf/log.hpp"
#include "ccopf/qp.hpp"

namespace ccopf {

std::string_view to_string(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::Thermal:
      return "thermal";
    case ConstraintKind::Sync:
      return "sync";
    case ConstraintKind::GenMin:
      return "gen-min";
    case ConstraintKind::GenMax:
      return "gen-max";
  }
  return "?";
}

ConstraintKind constraint_kind_from_string(std::string_view s) {
  for (auto k : {ConstraintKind::Thermal, ConstraintKind::Sync, ConstraintKind::GenMin, ConstraintKind::GenMax}) {
    if (to_string(k) == s) return k;
  }
  throw ParseError("unknown constraint kind '" + std::string(s) + "'");
}

ChanceSpec ChanceSpec::uniform(const Network& net, double line, double sync, double gen) {
  ChanceSpec c;
  c.eps_line = VectorXd::Constant(net.num_lines(), line);
  c.eps_sync = VectorXd::Constant(net.num_lines(), sync);
  c.eps_gen = VectorXd::Constant(net.num_generators(), gen);
  return c;
}

void ChanceSpec::validate(const Network& net) const {
  if (eps_line.size() != net.num_lines() || eps_sync.size() != net.num_lines() ||
      eps_gen.size() != net.num_generators()) {
    throw ValidationError("chance specification does not match the network");
  }
  auto check = [](const VectorXd& v, const char* what) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (!(v[i] > 0.0 && v[i] <= 0.5)) {
        throw ValidationError(std::string(what) + " tolerance " + std::to_string(v[i]) + " outside (0, 0.5]");
      }
    }
  };
  check(eps_line, "line");
  check(eps_sync, "sync");
  check(eps_gen, "generator");
}

ChanceModel::ChanceModel(const Network& net) : net_(&net) {
  const MatrixXd& b_red = net.laplacian().reduced_inverse();
  const MatrixXd sens = b_red * net.generator_map();
  const VectorXd base = b_red * (net.wind_mean() - net.demand());
  const auto& wind = net.wind_buses();
  const int m = net.num_lines();
  gain_ = MatrixXd(m, net.num_generators());
  offset_ = VectorXd(m);
  wind_ = MatrixXd(m, wind.size());
  var_ = VectorXd(wind.size());
  for (std::size_t k = 0; k < wind.size(); ++k) {
    const double s = net.bus(wind[k]).wind_sigma;
    var_[k] = s * s;
  }
  for (int l = 0; l < m; ++l) {
    const int i = net.line(l).from;
    const int j = net.line(l).to;
    gain_.row(l) = sens.row(i) - sens.row(j);
    offset_[l] = base[i] - base[j];
    for (std::size_t k = 0; k < wind.size(); ++k) wind_(l, k) = b_red(i, wind[k]) - b_red(j, wind[k]);
  }
}

double ChanceModel::mean_angle(int line, const VectorXd& p) const {
  return gain_.row(line).dot(p) + offset_[line];
}

double ChanceModel::angle_std_at(int line, double t, double* slope) const {
  double s2 = 0.0;
  double ds = 0.0;
  for (Eigen::Index k = 0; k < var_.size(); ++k) {
    const double r = wind_(line, k) - t;
    s2 += var_[k] * r * r;
    ds -= var_[k] * r;
  }
  const double s = std::sqrt(s2);
  if (slope) *slope = s > 0.0 ? ds / s : 0.0;
  return s;
}

double ChanceModel::angle_std(int line, const VectorXd& alpha) const {
  return angle_std_at(line, gain_.row(line).dot(alpha));
}

std::vector<ConicConstraint> conic_constraints(const Network& net, const ChanceSpec& chance) {
  std::vector<ConicConstraint> out;
  out.reserve(2 * net.num_lines());
  for (int l = 0; l < net.num_lines(); ++l) {
    const auto& line = net.line(l);
    out.push_back({l, ConstraintKind::Thermal, line.pbar / line.beta, eta(chance.eps_line[l])});
    out.push_back({l, ConstraintKind::Sync, 1.0, eta(chance.eps_sync[l])});
  }
  return out;
}

double conic_lhs(const ChanceModel& model, const ConicConstraint& con, const Dispatch& dispatch) {
  return model.angle_std(con.line, dispatch.alpha);
}

double conic_violation(const ChanceModel& model, const ConicConstraint& con, const Dispatch& dispatch) {
  return std::abs(model.mean_angle(con.line, dispatch.p)) + con.eta * conic_lhs(model, con, dispatch) - con.bound;
}

ViolationProbability analytic_violation_prob(double mean, double std_dev, double bound) {
  const double a = std::abs(mean);
  if (!(std_dev > 0.0)) {
    const double v = a > bound ? 1.0 : 0.0;
    return {v, v};
  }
  const double near = upper_tail((bound - a) / std_dev);
  const double far = upper_tail((bound + a) / std_dev);
  return {near + far, near};
}

ViolationProbability analytic_violation_prob(const ChanceModel& model, const ConicConstraint& con,
                                             const Dispatch& dispatch) {
  return analytic_violation_prob(model.mean_angle(con.line, dispatch.p), conic_lhs(model, con, dispatch),
                                 con.bound);
}

void evaluate_risk(const ChanceModel& model, const ChanceSpec& chance, const Dispatch& dispatch,
                   std::vector<LineRisk>& lines, std::vector<GeneratorRisk>& generators, double binding_tol) {
  const Network& net = model.network();
  lines.assign(net.num_lines(), {});
  for (int l = 0; l < net.num_lines(); ++l) {
    const auto& line = net.line(l);
    const double m = model.mean_angle(l, dispatch.p);
    const double s = model.angle_std(l, dispatch.alpha);
    LineRisk& r = lines[l];
    r.mean_flow = line.beta * m;
    r.std_angle = s;
    r.thermal = analytic_violation_prob(m, s, line.pbar / line.beta);
    r.sync = analytic_violation_prob(m, s, 1.0);
    r.thermal_binding = std::abs(m) + eta(chance.eps_line[l]) * s >= line.pbar / line.beta - binding_tol;
    r.sync_binding = std::abs(m) + eta(chance.eps_sync[l]) * s >= 1.0 - binding_tol;
  }
  const double total_std = std::sqrt(net.total_wind_variance());
  generators.assign(net.num_generators(), {});
  for (int g = 0; g < net.num_generators(); ++g) {
    const auto& gen = net.generator(g);
    const double s = dispatch.alpha[g] * total_std;
    const double p = dispatch.p[g];
    if (s > 0.0) {
      generators[g].below_min = upper_tail((p - gen.p_min) / s);
      generators[g].above_max = upper_tail((gen.p_max - p) / s);
    } else {
      generators[g].below_min = p < gen.p_min ? 1.0 : 0.0;
      generators[g].above_max = p > gen.p_max ? 1.0 : 0.0;
    }
  }
}

CcSolution solve_cc_opf(const Network& net, const ChanceSpec& chance, const CcOptions& opt) {
  chance.validate(net);
  const ChanceModel model(net);
  const int n_gen = net.num_generators();
  const int m = net.num_lines();
  const int nv = 2 * n_gen;
  const double total_var = net.total_wind_variance();
  const double total_std = std::sqrt(total_var);
  const double tol = opt.tol_cut;

  QuadraticProgram qp;
  qp.Q = MatrixXd::Zero(nv, nv);
  qp.c = VectorXd::Zero(nv);
  qp.lo = VectorXd::Zero(nv);
  qp.hi = VectorXd::Constant(nv, std::numeric_limits<double>::infinity());
  double constant = 0.0;
  for (int g = 0; g < n_gen; ++g) {
    const auto& gen = net.generator(g);
    const double margin = eta(chance.eps_gen[g]) * total_std;
    const double lo = std::max(0.0, gen.p_min + margin);
    const double hi = gen.p_max - margin;
    if (lo > hi) {
      throw Infeasible("generator " + std::to_string(g) + " has no room for its reserve margin");
    }
    qp.Q(g, g) = 2.0 * gen.c1;
    qp.Q(n_gen + g, n_gen + g) = 2.0 * gen.c1 * total_var;
    qp.c[g] = gen.c2;
    qp.lo[g] = lo;
    qp.hi[g] = hi;
    constant += gen.c3;
  }
  qp.A_eq = MatrixXd::Zero(2, nv);
  qp.A_eq.block(0, 0, 1, n_gen).setOnes();
  qp.A_eq.block(1, n_gen, 1, n_gen).setOnes();
  qp.b_eq = VectorXd(2);
  qp.b_eq << (net.demand() - net.wind_mean()).sum(), 1.0;

  // Deterministic part of each line: |mean| <= min(pbar/beta, 1), i.e. s >= 0.
  const MatrixXd& gain = model.mean_gain();
  const VectorXd& offset = model.mean_offset();
  std::vector<Eigen::RowVectorXd> rows;
  std::vector<double> rhs;
  for (int l = 0; l < m; ++l) {
    const double b = net.effective_capacity(l) - tol;
    Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(nv);
    r.head(n_gen) = gain.row(l);
    rows.push_back(r);
    rhs.push_back(b - offset[l]);
    rows.push_back(-r);
    rhs.push_back(b + offset[l]);
  }

  const auto cons = conic_constraints(net, chance);
  CcSolution out;
  QpOptions qopt;
  int previous_rows = 0;
  std::vector<int> previous_active;

  auto add_cut = [&](int l, ConstraintKind kind, int iteration, double t) {
    double slope = 0.0;
    const double s = model.angle_std_at(l, t, &slope);
    if (!(s > 0.0)) return false;
    for (const auto& c : out.cuts) {
      if (c.line == l && std::abs(c.t - t) <= 1e-14 * std::max(1.0, std::abs(t))) return false;
    }
    out.cuts.push_back({l, kind, iteration, t, s, slope});
    for (int k = 0; k < 2; ++k) {
      const ConicConstraint& con = cons[2 * l + k];
      if (con.eta == 0.0) continue;
      for (double sign : {1.0, -1.0}) {
        Eigen::RowVectorXd r(nv);
        r.head(n_gen) = sign * gain.row(l);
        r.tail(n_gen) = con.eta * slope * gain.row(l);
        rows.push_back(r);
        rhs.push_back(con.bound - tol - sign * offset[l] - con.eta * (s - slope * t));
      }
    }
    return true;
  };

  for (int iteration = 1;; ++iteration) {
    const int n_rows = static_cast<int>(rows.size());
    qp.A_in = MatrixXd(n_rows, nv);
    qp.b_in = VectorXd(n_rows);
    for (int r = 0; r < n_rows; ++r) {
      qp.A_in.row(r) = rows[r];
      qp.b_in[r] = rhs[r];
    }
    qopt.warm_start.clear();
    for (int idx : previous_active) qopt.warm_start.push_back(idx < previous_rows ? idx : idx + n_rows - previous_rows);

    QpSolution sol = solve_qp(qp, qopt);
    if (sol.status == QpStatus::Infeasible) throw Infeasible("chance constraints cannot be met by any dispatch");
    if (sol.status != QpStatus::Optimal) {
      throw NumericalBreakdown(std::string("cutting-plane QP ended with status ") + std::string(to_string(sol.status)));
    }
    previous_rows = n_rows;
    previous_active = sol.active_set;
    out.iterations = iteration;
    out.dispatch.p = sol.x.head(n_gen);
    out.dispatch.alpha = sol.x.tail(n_gen);
    out.objective = sol.objective + constant;
    out.objectives.push_back(out.objective);

    // Violations measured against the shrunk bounds used in the QP rows.
    int worst = -1;
    double worst_v = tol;
    out.max_violation = -std::numeric_limits<double>::infinity();
    std::vector<int> violated;
    for (std::size_t c = 0; c < cons.size(); ++c) {
      const double v = conic_violation(model, cons[c], out.dispatch);
      out.max_violation = std::max(out.max_violation, v);
      const double shrunk = v + tol;
      if (shrunk > tol) violated.push_back(static_cast<int>(c));
      if (shrunk > worst_v) {
        worst_v = shrunk;
        worst = static_cast<int>(c);
      }
    }
    if (worst < 0) break;
    if (iteration >= opt.max_iter) {
      out.status = CcStatus::IterLimit;
      log().warn("cutting-plane iteration limit {} reached, worst violation {:g}", opt.max_iter, worst_v);
      break;
    }

    bool added = false;
    auto cut_for = [&](int c, double v) {
      const int l = cons[c].line;
      const double t = gain.row(l).dot(out.dispatch.alpha);
      if (add_cut(l, cons[c].kind, iteration, t)) {
        out.log.push_back({iteration, l, cons[c].kind, v, out.objective});
        log().debug("iteration {} cut line {} ({}) violation {:g}", iteration, l, to_string(cons[c].kind), v);
        added = true;
      }
    };
    if (opt.all_violated) {
      std::vector<char> seen(m, 0);
      for (int c : violated) {
        if (seen[cons[c].line]) continue;
        seen[cons[c].line] = 1;
        cut_for(c, conic_violation(model, cons[c], out.dispatch));
      }
    } else {
      cut_for(worst, worst_v - tol);
    }
    if (!added) throw NumericalBreakdown("violated chance constraint admits no new cut");
  }

  evaluate_risk(model, chance, out.dispatch, out.lines, out.generators);
  return out;
}

}  // namespace ccopf
