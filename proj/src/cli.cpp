#include "ccopf/cli.hpp"

#include <cmath>
#include <optional>
#include <ostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "json_out.hpp"

#include "ccopf/case_io.hpp"
#include "ccopf/cc_opf.hpp"
#include "ccopf/det_opf.hpp"
#include "ccopf/errors.hpp"
#include "ccopf/ld_risk.hpp"
#include "ccopf/log.hpp"
#include "ccopf/mc_validate.hpp"
#include "ccopf/pf.hpp"

namespace ccopf::cli {

namespace {

using ojson = nlohmann::ordered_json;

struct Config {
  std::string command;
  std::string variant;
  std::string case_path;
  std::string out_path;
  std::string format = "json";
  std::optional<double> eps_line;
  std::optional<double> eps_sync;
  std::optional<double> eps_gen;
  std::int64_t samples = 100000;
  std::uint64_t seed = 1;
  bool nonlinear_mc = false;
  int threads = 0;
  double tol_cut = 1e-7;
  int max_iters = 200;
  double barrier_eps = 0.01;
  std::string plot_path;
  std::string report_path;
  std::string injections_path;
  bool no_thermal_cap = false;
  int line = 0;
  std::optional<double> rho;
  bool nonlinear_risk = false;
};

CaseFile load_case(const Config& cfg) {
  CaseFile c = parse_case(cfg.case_path);
  const Network& net = c.network;
  if (cfg.eps_line) c.chance.eps_line = VectorXd::Constant(net.num_lines(), *cfg.eps_line);
  if (cfg.eps_sync) c.chance.eps_sync = VectorXd::Constant(net.num_lines(), *cfg.eps_sync);
  if (cfg.eps_gen) c.chance.eps_gen = VectorXd::Constant(net.num_generators(), *cfg.eps_gen);
  c.chance.validate(net);
  return c;
}

void emit(const Config& cfg, const std::string& text, std::ostream& out) {
  if (cfg.out_path.empty()) {
    out << text;
  } else {
    write_file(cfg.out_path, text);
  }
}

// Deterministic solvers carry no response policy; equal shares are reported.
VectorXd equal_shares(const Network& net) {
  return VectorXd::Constant(net.num_generators(), 1.0 / net.num_generators());
}

ojson real_json(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? ojson(nullptr) : ojson(v > 0 ? "inf" : "-inf");
  return v;
}

ojson vec_json(const VectorXd& v) {
  ojson a = ojson::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(real_json(v[i]));
  return a;
}

int cmd_solve(const Config& cfg, std::ostream& out) {
  const CaseFile c = load_case(cfg);
  const Network& net = c.network;
  const ReportFormat format = report_format_from_string(cfg.format);
  SolutionReport report;
  int code = kOk;
  if (cfg.variant == "dc" || cfg.variant == "scopf") {
    const OpfResult r = cfg.variant == "dc" ? solve_dc_opf(net) : solve_scopf(net);
    Dispatch d{r.dispatch.p, equal_shares(net)};
    std::string status = "optimal";
    if (cfg.variant == "scopf" && !r.sync_recovered) status = "sync-recovery-failed";
    report = make_report(net, c.chance, d, cfg.variant, status, r.objective);
  } else if (cfg.variant == "barrier") {
    BarrierConfig bc;
    bc.epsilon = cfg.barrier_eps;
    const BarrierResult r = solve_barrier_opf(net, bc);
    Dispatch d{r.dispatch.p, equal_shares(net)};
    report = make_report(net, c.chance, d, "barrier", "optimal", r.cost);
  } else {
    CcOptions opt;
    opt.tol_cut = cfg.tol_cut;
    opt.max_iter = cfg.max_iters;
    const CcSolution sol = solve_cc_opf(net, c.chance, opt);
    const bool done = sol.status == CcStatus::Optimal;
    report = make_report(net, c.chance, sol.dispatch, "ccopf", done ? "optimal" : "iteration-limit", sol.objective);
    for (const auto& e : sol.log) {
      report.iterations.push_back({e.iteration, e.line, std::string(to_string(e.kind)), e.violation, e.objective});
    }
    if (!done) code = kNoConvergence;
  }
  if (!cfg.plot_path.empty()) write_file(cfg.plot_path, write_iteration_csv(report.iterations));
  emit(cfg, write_report(report, format), out);
  return code;
}

Dispatch dispatch_from_report(const Config& cfg, const Network& net) {
  if (cfg.report_path.empty()) throw ParseError("--report is required");
  return report_dispatch(read_report(read_file(cfg.report_path)), net);
}

int cmd_pf(const Config& cfg, std::ostream& out) {
  const CaseFile c = load_case(cfg);
  const Network& net = c.network;
  VectorXd q;
  if (!cfg.injections_path.empty()) {
    const auto doc = nlohmann::json::parse(read_file(cfg.injections_path), nullptr, false);
    if (doc.is_discarded() || !doc.is_array()) throw ParseError("injections: expected a JSON array of numbers");
    if (static_cast<int>(doc.size()) != net.num_buses()) throw ValidationError("injections: one value per bus expected");
    q.resize(net.num_buses());
    for (int i = 0; i < net.num_buses(); ++i) {
      if (!doc[i].is_number()) throw ParseError("injections[" + std::to_string(i) + "]: expected a number");
      q[i] = doc[i].get<double>();
    }
  } else {
    const Dispatch d = dispatch_from_report(cfg, net);
    q = net.bus_generation(d.p) + net.wind_mean() - net.demand();
  }
  PfOptions opt;
  opt.thermal_cap = !cfg.no_thermal_cap;
  const FlowState st = solve_pf(net, q, opt);
  ojson doc;
  doc["feasible"] = st.feasible;
  doc["boundary_hit"] = st.boundary_hit;
  doc["objective"] = real_json(st.objective);
  VectorXd flows(net.num_lines());
  ojson at_bound = ojson::array();
  for (int l = 0; l < net.num_lines(); ++l) {
    flows[l] = net.line(l).beta * st.rho[l];
    at_bound.push_back(static_cast<bool>(st.at_bound[l]));
  }
  doc["rho"] = vec_json(st.rho);
  doc["flows"] = vec_json(flows);
  doc["theta"] = vec_json(st.theta);
  doc["at_bound"] = at_bound;
  emit(cfg, detail::dump_json(doc), out);
  return st.feasible ? kOk : kInfeasible;
}

int cmd_validate(const Config& cfg, std::ostream& out) {
  const CaseFile c = load_case(cfg);
  const Network& net = c.network;
  const Dispatch d = dispatch_from_report(cfg, net);
  McOptions opt;
  opt.samples = cfg.samples;
  opt.seed = cfg.seed;
  opt.threads = cfg.threads;
  if (cfg.nonlinear_mc) opt.nonlinear = true;
  const McReport mc = run_mc(net, d, opt);
  const Certification cert = certify(mc, c.chance);
  emit(cfg, write_mc_report(mc, cert), out);
  return cert.passed ? kOk : kCertificationFailed;
}

int cmd_risk(const Config& cfg, std::ostream& out) {
  const CaseFile c = load_case(cfg);
  const Network& net = c.network;
  if (cfg.line < 0 || cfg.line >= net.num_lines()) throw ValidationError("--line out of range");
  const Dispatch d = dispatch_from_report(cfg, net);
  // Default: the capacity on the side the mean flow points to.
  const double mean = net.line(cfg.line).beta * ChanceModel(net).mean_angle(cfg.line, d.p);
  const double rho = cfg.rho.value_or(mean < 0.0 ? -net.line(cfg.line).pbar : net.line(cfg.line).pbar);
  const double eps = c.chance.eps_line[cfg.line];
  const InstantonResult dc = e_dc_closed_form(net, d, cfg.line, rho);
  ojson doc;
  doc["line"] = cfg.line;
  doc["rho"] = real_json(rho);
  doc["epsilon"] = real_json(eps);
  doc["threshold"] = real_json(std::log(1.0 / eps));
  doc["energy_dc"] = real_json(dc.energy);
  doc["status"] = dc.status == InstantonStatus::Ok ? "ok" : "zero-variance";
  doc["omega_dc"] = vec_json(dc.omega);
  double energy = dc.energy;
  if (cfg.nonlinear_risk) {
    const InstantonResult nl = nonlinear_instanton(net, d, cfg.line, rho);
    doc["energy_nonlinear"] = real_json(nl.energy);
    doc["omega_nonlinear"] = vec_json(nl.omega);
    energy = nl.energy;
  }
  const bool pass = ld_condition_check(energy, eps);
  doc["passed"] = pass;
  emit(cfg, detail::dump_json(doc), out);
  return pass ? kOk : kCertificationFailed;
}

void add_case(CLI::App* sub, Config& cfg) {
  sub->add_option("--case", cfg.case_path, "case file (JSON, or MATPOWER .m)")->required();
  sub->add_option("--out", cfg.out_path, "write the report here instead of stdout");
  sub->add_option("--eps-line", cfg.eps_line, "thermal tolerance for every line");
  sub->add_option("--eps-sync", cfg.eps_sync, "synchronization tolerance for every line");
  sub->add_option("--eps-gen", cfg.eps_gen, "generator tolerance for every generator");
}

int map_error(const std::exception& e, std::ostream& err) {
  err << "error: " << e.what() << "\n";
  if (dynamic_cast<const Infeasible*>(&e)) return kInfeasible;
  if (dynamic_cast<const IterLimit*>(&e) || dynamic_cast<const NoConvergence*>(&e) ||
      dynamic_cast<const BarrierDivergence*>(&e) || dynamic_cast<const SyncRecoveryFailed*>(&e) ||
      dynamic_cast<const NumericalBreakdown*>(&e)) {
    return kNoConvergence;
  }
  return kUsage;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Config cfg;
  CLI::App app{"Chance-constrained optimal power flow"};
  app.name("ccopf");
  app.require_subcommand(1);

  auto* solve = app.add_subcommand("solve", "solve an OPF variant and write a solution report");
  solve->add_option("variant", cfg.variant, "dc, scopf, barrier or ccopf")
      ->required()
      ->check(CLI::IsMember({"dc", "scopf", "barrier", "ccopf"}));
  add_case(solve, cfg);
  solve->add_option("--format", cfg.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  solve->add_option("--tol-cut", cfg.tol_cut, "cutting-plane violation tolerance")->check(CLI::PositiveNumber);
  solve->add_option("--max-iters", cfg.max_iters, "cutting-plane iteration limit")->check(CLI::PositiveNumber);
  solve->add_option("--barrier-eps", cfg.barrier_eps, "barrier accuracy parameter");
  solve->add_option("--emit-plot-data", cfg.plot_path, "per-iteration CSV for plotting");

  auto* pf = app.add_subcommand("pf", "nonlinear power flow for given injections");
  add_case(pf, cfg);
  pf->add_option("--report", cfg.report_path, "take injections from a solution report");
  pf->add_option("--injections", cfg.injections_path, "JSON array of per-bus injections");
  pf->add_flag("--no-thermal-cap", cfg.no_thermal_cap, "bound only by synchronization");

  auto* validate = app.add_subcommand("validate", "Monte Carlo check of a reported dispatch");
  add_case(validate, cfg);
  validate->add_option("--report", cfg.report_path, "solution report to validate")->required();
  validate->add_option("--samples", cfg.samples, "number of wind samples")->check(CLI::PositiveNumber);
  validate->add_option("--seed", cfg.seed, "random seed");
  validate->add_option("--threads", cfg.threads, "worker threads (0: all cores)");
  validate->add_flag("--nonlinear-mc", cfg.nonlinear_mc, "also run the sine power flow per sample");

  auto* risk = app.add_subcommand("risk", "large-deviation rate of a line overload");
  add_case(risk, cfg);
  risk->add_option("--report", cfg.report_path, "solution report with the dispatch")->required();
  risk->add_option("--line", cfg.line, "line index")->required();
  risk->add_option("--rho", cfg.rho, "flow threshold (default: the capacity, signed like the mean flow)");
  risk->add_flag("--nonlinear", cfg.nonlinear_risk, "also solve the sine-flow instanton");

  std::vector<std::string> storage = {"ccopf"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : storage) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (solve->parsed()) return cmd_solve(cfg, out);
    if (pf->parsed()) {
      if (cfg.report_path.empty() == cfg.injections_path.empty()) {
        err << "error: pf needs exactly one of --report and --injections\n";
        return kUsage;
      }
      return cmd_pf(cfg, out);
    }
    if (validate->parsed()) return cmd_validate(cfg, out);
    return cmd_risk(cfg, out);
  } catch (const std::exception& e) {
    return map_error(e, err);
  }
}

}  // namespace ccopf::cli
