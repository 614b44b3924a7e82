#include "ccopf/case_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <regex>
#include <sstream>

#include "json.hpp"
#include "json_out.hpp"

#include "ccopf/errors.hpp"
#include "ccopf/log.hpp"

namespace ccopf {

namespace {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

const json& field(const json& obj, const char* key, const std::string& ctx) {
  if (!obj.is_object()) throw ParseError(ctx + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(ctx + ": missing field '" + key + "'");
  return *it;
}

double number(const json& obj, const char* key, const std::string& ctx) {
  const json& v = field(obj, key, ctx);
  if (!v.is_number()) throw ParseError(ctx + "." + key + ": expected a number");
  return v.get<double>();
}

double number_or(const json& obj, const char* key, double fallback, const std::string& ctx) {
  if (!obj.contains(key)) return fallback;
  return number(obj, key, ctx);
}

std::int64_t integer(const json& obj, const char* key, const std::string& ctx) {
  const json& v = field(obj, key, ctx);
  if (!v.is_number_integer()) throw ParseError(ctx + "." + key + ": expected an integer");
  return v.get<std::int64_t>();
}

const json& array(const json& obj, const char* key, const std::string& ctx) {
  const json& v = field(obj, key, ctx);
  if (!v.is_array()) throw ParseError(ctx + "." + key + ": expected an array");
  return v;
}

std::string string_field(const json& obj, const char* key, const std::string& ctx) {
  const json& v = field(obj, key, ctx);
  if (!v.is_string()) throw ParseError(ctx + "." + key + ": expected a string");
  return v.get<std::string>();
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
}

ojson real(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double real_from(const json& v, const std::string& ctx) {
  if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  if (!v.is_number()) throw ParseError(ctx + ": expected a number");
  return v.get<double>();
}

double real_field(const json& obj, const char* key, const std::string& ctx) {
  return real_from(field(obj, key, ctx), ctx + "." + key);
}

struct RawLine {
  int from;
  int to;
};

// Merged line index for each input line, matching Network::build.
std::vector<int> merged_index(const std::vector<RawLine>& lines) {
  std::map<std::pair<int, int>, int> seen;
  std::vector<int> out;
  for (const auto& l : lines) {
    auto key = std::minmax(l.from, l.to);
    auto it = seen.emplace(key, static_cast<int>(seen.size())).first;
    out.push_back(it->second);
  }
  return out;
}

}  // namespace

CaseFile parse_case_text(const std::string& text, const ChanceDefaults& defaults) {
  const json doc = parse_json(text);
  if (!doc.is_object()) throw ParseError("case: expected a JSON object");
  CaseFile out;
  if (doc.contains("schema_version")) {
    out.schema_version = string_field(doc, "schema_version", "case");
    if (out.schema_version != kCaseSchema) {
      throw ParseError("case.schema_version: unrecognized version '" + out.schema_version + "'");
    }
  }

  std::vector<Bus> buses;
  std::map<int, int> index_of;
  const json& jb = array(doc, "buses", "case");
  for (std::size_t i = 0; i < jb.size(); ++i) {
    const std::string ctx = "buses[" + std::to_string(i) + "]";
    Bus b;
    b.id = static_cast<int>(integer(jb[i], "id", ctx));
    b.demand = number_or(jb[i], "d", 0.0, ctx);
    b.wind_mean = number_or(jb[i], "mu", 0.0, ctx);
    b.wind_sigma = number_or(jb[i], "sigma", 0.0, ctx);
    if (!index_of.emplace(b.id, static_cast<int>(buses.size())).second) {
      throw ValidationError(ctx + ": duplicate bus id " + std::to_string(b.id));
    }
    buses.push_back(b);
  }
  auto bus_ref = [&](std::int64_t id, const std::string& ctx) {
    auto it = index_of.find(static_cast<int>(id));
    if (it == index_of.end()) throw ValidationError(ctx + ": unknown bus id " + std::to_string(id));
    return it->second;
  };

  std::vector<Generator> gens;
  const json& jg = array(doc, "generators", "case");
  if (jg.empty()) throw ValidationError("case: at least one generator is required");
  for (std::size_t i = 0; i < jg.size(); ++i) {
    const std::string ctx = "generators[" + std::to_string(i) + "]";
    Generator g;
    g.bus = bus_ref(integer(jg[i], "bus", ctx), ctx + ".bus");
    g.p_min = number(jg[i], "pmin", ctx);
    g.p_max = number(jg[i], "pmax", ctx);
    g.c1 = number_or(jg[i], "c1", 0.0, ctx);
    g.c2 = number_or(jg[i], "c2", 0.0, ctx);
    g.c3 = number_or(jg[i], "c3", 0.0, ctx);
    if (g.p_min > g.p_max) throw ValidationError(ctx + ": pmin > pmax");
    gens.push_back(g);
  }

  std::vector<Line> lines;
  std::vector<RawLine> raw;
  const json& jl = array(doc, "lines", "case");
  for (std::size_t i = 0; i < jl.size(); ++i) {
    const std::string ctx = "lines[" + std::to_string(i) + "]";
    Line l;
    l.from = bus_ref(integer(jl[i], "from", ctx), ctx + ".from");
    l.to = bus_ref(integer(jl[i], "to", ctx), ctx + ".to");
    l.beta = number(jl[i], "beta", ctx);
    l.pbar = number(jl[i], "pbar", ctx);
    lines.push_back(l);
    raw.push_back({l.from, l.to});
  }
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].wind_sigma < 0.0) {
      throw ValidationError("buses[" + std::to_string(i) + "]: negative sigma");
    }
  }

  std::optional<int> slack;
  if (doc.contains("slack_bus") && !doc["slack_bus"].is_null()) {
    slack = bus_ref(integer(doc, "slack_bus", "case"), "case.slack_bus");
  }
  out.network = Network::build(std::move(buses), std::move(gens), std::move(lines), slack);

  out.defaults = defaults;
  std::vector<std::tuple<std::string, int, double>> overrides;
  if (doc.contains("chance")) {
    const json& jc = doc["chance"];
    out.defaults.eps_line = number_or(jc, "eps_line_default", defaults.eps_line, "chance");
    out.defaults.eps_sync = number_or(jc, "eps_sync_default", defaults.eps_sync, "chance");
    out.defaults.eps_gen = number_or(jc, "eps_gen_default", defaults.eps_gen, "chance");
    if (jc.contains("overrides")) {
      const json& jo = array(jc, "overrides", "chance");
      for (std::size_t i = 0; i < jo.size(); ++i) {
        const std::string ctx = "chance.overrides[" + std::to_string(i) + "]";
        overrides.emplace_back(string_field(jo[i], "kind", ctx), static_cast<int>(integer(jo[i], "index", ctx)),
                               number(jo[i], "eps", ctx));
      }
    }
  }
  const Network& net = out.network;
  out.chance = ChanceSpec::uniform(net, out.defaults.eps_line, out.defaults.eps_sync, out.defaults.eps_gen);
  const std::vector<int> merged = merged_index(raw);
  for (std::size_t i = 0; i < overrides.size(); ++i) {
    const auto& [kind, index, eps] = overrides[i];
    const std::string ctx = "chance.overrides[" + std::to_string(i) + "]";
    if (kind == "thermal" || kind == "sync") {
      if (index < 0 || index >= static_cast<int>(merged.size())) throw ValidationError(ctx + ": line index out of range");
      VectorXd& v = kind == "thermal" ? out.chance.eps_line : out.chance.eps_sync;
      const int k = merged[index];
      // Merged parallel lines keep the tighter tolerance.
      v[k] = v[k] == (kind == "thermal" ? out.defaults.eps_line : out.defaults.eps_sync) ? eps : std::min(v[k], eps);
    } else if (kind == "gen") {
      if (index < 0 || index >= net.num_generators()) throw ValidationError(ctx + ": generator index out of range");
      out.chance.eps_gen[index] = eps;
    } else {
      throw ParseError(ctx + ".kind: expected thermal, sync or gen");
    }
  }
  out.chance.validate(net);
  return out;
}

CaseFile parse_case(const std::string& path, const ChanceDefaults& defaults) {
  const std::string text = read_file(path);
  if (path.size() > 2 && path.substr(path.size() - 2) == ".m") return import_matpower_text(text, defaults);
  return parse_case_text(text, defaults);
}

std::string write_case(const CaseFile& c) {
  const Network& net = c.network;
  ojson doc;
  doc["schema_version"] = c.schema_version;
  ojson buses = ojson::array();
  for (const auto& b : net.buses()) {
    ojson jb;
    jb["id"] = b.id;
    jb["d"] = b.demand;
    jb["mu"] = b.wind_mean;
    jb["sigma"] = b.wind_sigma;
    buses.push_back(jb);
  }
  doc["buses"] = buses;
  ojson gens = ojson::array();
  for (const auto& g : net.generators()) {
    ojson jg;
    jg["bus"] = net.bus(g.bus).id;
    jg["pmin"] = g.p_min;
    jg["pmax"] = g.p_max;
    jg["c1"] = g.c1;
    jg["c2"] = g.c2;
    jg["c3"] = g.c3;
    gens.push_back(jg);
  }
  doc["generators"] = gens;
  ojson lines = ojson::array();
  for (const auto& l : net.lines()) {
    ojson jl;
    jl["from"] = net.bus(l.from).id;
    jl["to"] = net.bus(l.to).id;
    jl["beta"] = l.beta;
    jl["pbar"] = l.pbar;
    lines.push_back(jl);
  }
  doc["lines"] = lines;
  ojson chance;
  chance["eps_line_default"] = c.defaults.eps_line;
  chance["eps_sync_default"] = c.defaults.eps_sync;
  chance["eps_gen_default"] = c.defaults.eps_gen;
  ojson overrides = ojson::array();
  auto add = [&](const char* kind, const VectorXd& v, double def) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (v[i] == def) continue;
      ojson o;
      o["kind"] = kind;
      o["index"] = i;
      o["eps"] = v[i];
      overrides.push_back(o);
    }
  };
  add("thermal", c.chance.eps_line, c.defaults.eps_line);
  add("sync", c.chance.eps_sync, c.defaults.eps_sync);
  add("gen", c.chance.eps_gen, c.defaults.eps_gen);
  chance["overrides"] = overrides;
  doc["chance"] = chance;
  doc["slack_bus"] = net.bus(net.slack()).id;
  return doc.dump(2) + "\n";
}

namespace {

// Rows of a MATPOWER matrix assignment "mpc.<name> = [ ... ];".
std::vector<std::vector<double>> matpower_matrix(const std::string& text, const std::string& name, bool required) {
  const std::regex head("mpc\\." + name + "\\s*=\\s*\\[");
  std::smatch m;
  if (!std::regex_search(text, m, head)) {
    if (required) throw ParseError("matpower: missing mpc." + name);
    return {};
  }
  const std::size_t begin = m.position(0) + m.length(0);
  const std::size_t end = text.find(']', begin);
  if (end == std::string::npos) throw ParseError("matpower: unterminated mpc." + name);
  std::vector<std::vector<double>> rows;
  std::vector<double> row;
  std::string body = text.substr(begin, end - begin);
  std::istringstream in(body);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto pct = raw.find('%');
    if (pct != std::string::npos) raw.erase(pct);
    std::string token;
    for (std::size_t i = 0; i <= raw.size(); ++i) {
      const char ch = i < raw.size() ? raw[i] : '\n';
      if (ch == ';' || ch == '\n' || ch == ' ' || ch == '\t' || ch == ',' || ch == '\r') {
        if (!token.empty()) {
          try {
            std::size_t used = 0;
            row.push_back(std::stod(token, &used));
            if (used != token.size()) throw std::invalid_argument(token);
          } catch (const std::exception&) {
            throw ParseError("matpower: mpc." + name + " line " + std::to_string(line_no) + ": bad number '" +
                             token + "'");
          }
          token.clear();
        }
        if ((ch == ';' || ch == '\n') && !row.empty()) {
          rows.push_back(std::move(row));
          row.clear();
        }
      } else {
        token.push_back(ch);
      }
    }
  }
  return rows;
}

void need_columns(const std::vector<std::vector<double>>& rows, std::size_t cols, const std::string& name) {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() < cols) {
      throw ParseError("matpower: mpc." + name + " row " + std::to_string(i + 1) + " has too few columns");
    }
  }
}

}  // namespace

CaseFile import_matpower_text(const std::string& text, const ChanceDefaults& defaults) {
  double base = 100.0;
  {
    std::smatch m;
    if (std::regex_search(text, m, std::regex("mpc\\.baseMVA\\s*=\\s*([0-9.eE+-]+)"))) base = std::stod(m[1]);
  }
  const auto bus_rows = matpower_matrix(text, "bus", true);
  const auto gen_rows = matpower_matrix(text, "gen", true);
  const auto branch_rows = matpower_matrix(text, "branch", true);
  const auto cost_rows = matpower_matrix(text, "gencost", false);
  need_columns(bus_rows, 4, "bus");
  need_columns(gen_rows, 10, "gen");
  need_columns(branch_rows, 6, "branch");

  std::vector<Bus> buses;
  std::map<int, int> index_of;
  std::optional<int> slack;
  bool dropped = false;
  for (const auto& r : bus_rows) {
    Bus b;
    b.id = static_cast<int>(r[0]);
    b.demand = r[2] / base;
    if (r[3] != 0.0 || (r.size() > 5 && (r[4] != 0.0 || r[5] != 0.0))) dropped = true;
    if (!index_of.emplace(b.id, static_cast<int>(buses.size())).second) {
      throw ValidationError("matpower: duplicate bus id " + std::to_string(b.id));
    }
    if (static_cast<int>(r[1]) == 3) slack = static_cast<int>(buses.size());
    buses.push_back(b);
  }
  auto bus_ref = [&](double id, const std::string& ctx) {
    auto it = index_of.find(static_cast<int>(id));
    if (it == index_of.end()) throw ValidationError("matpower: " + ctx + " references unknown bus");
    return it->second;
  };

  std::vector<Generator> gens;
  for (std::size_t i = 0; i < gen_rows.size(); ++i) {
    const auto& r = gen_rows[i];
    if (r[7] <= 0.0) continue;
    Generator g;
    g.bus = bus_ref(r[0], "gen row " + std::to_string(i + 1));
    g.p_max = r[8] / base;
    g.p_min = r[9] / base;
    g.c1 = 0.0;
    g.c2 = 1.0;
    if (i < cost_rows.size() && cost_rows[i].size() >= 4 && static_cast<int>(cost_rows[i][0]) == 2) {
      const auto& c = cost_rows[i];
      const int ncoef = static_cast<int>(c[3]);
      std::vector<double> coef(c.begin() + 4, c.begin() + std::min<std::size_t>(c.size(), 4 + ncoef));
      // Highest order first; per-unit scaling of the MW variable.
      const int k = static_cast<int>(coef.size());
      g.c3 = k >= 1 ? coef[k - 1] : 0.0;
      g.c2 = k >= 2 ? coef[k - 2] * base : 0.0;
      g.c1 = k >= 3 ? coef[k - 3] * base * base : 0.0;
    }
    gens.push_back(g);
  }
  if (gens.empty()) throw ValidationError("matpower: no in-service generator");

  std::vector<Line> lines;
  for (std::size_t i = 0; i < branch_rows.size(); ++i) {
    const auto& r = branch_rows[i];
    if (r.size() > 10 && r[10] <= 0.0) continue;
    const std::string ctx = "branch row " + std::to_string(i + 1);
    Line l;
    l.from = bus_ref(r[0], ctx);
    l.to = bus_ref(r[1], ctx);
    if (!(r[3] > 0.0)) throw ValidationError("matpower: " + ctx + " has non-positive reactance");
    l.beta = 1.0 / r[3];
    const double rate = r.size() > 5 ? r[5] : 0.0;
    l.pbar = rate > 0.0 ? rate / base : 1e3 * l.beta;
    if (r[2] != 0.0 || r[4] != 0.0) dropped = true;
    lines.push_back(l);
  }
  if (dropped) log().warn("matpower import keeps topology only; resistance, shunt and voltage data are dropped");

  CaseFile out;
  out.network = Network::build(std::move(buses), std::move(gens), std::move(lines), slack);
  out.defaults = defaults;
  out.chance = ChanceSpec::uniform(out.network, defaults.eps_line, defaults.eps_sync, defaults.eps_gen);
  return out;
}

CaseFile import_matpower(const std::string& path, const ChanceDefaults& defaults) {
  return import_matpower_text(read_file(path), defaults);
}

ReportFormat report_format_from_string(const std::string& s) {
  if (s == "json") return ReportFormat::Json;
  if (s == "csv") return ReportFormat::Csv;
  throw ParseError("unknown report format '" + s + "'");
}

SolutionReport make_report(const Network& net, const ChanceSpec& chance, const Dispatch& dispatch, std::string solver,
                           std::string status, double objective) {
  ChanceModel model(net);
  std::vector<LineRisk> lines;
  std::vector<GeneratorRisk> gens;
  evaluate_risk(model, chance, dispatch, lines, gens);
  SolutionReport r;
  r.solver = std::move(solver);
  r.status = std::move(status);
  r.objective = objective;
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& con : conic_constraints(net, chance)) worst = std::max(worst, conic_violation(model, con, dispatch));
  r.max_violation = net.num_lines() ? worst : 0.0;
  for (int l = 0; l < net.num_lines(); ++l) {
    ReportLine row;
    row.id = l;
    row.from = net.bus(net.line(l).from).id;
    row.to = net.bus(net.line(l).to).id;
    row.mean_flow = lines[l].mean_flow;
    row.prob_thermal = lines[l].thermal.two_sided;
    row.prob_sync = lines[l].sync.two_sided;
    row.prob_thermal_one_sided = lines[l].thermal.one_sided;
    row.prob_sync_one_sided = lines[l].sync.one_sided;
    row.thermal_binding = lines[l].thermal_binding;
    row.sync_binding = lines[l].sync_binding;
    r.lines.push_back(row);
  }
  for (int g = 0; g < net.num_generators(); ++g) {
    ReportGenerator row;
    row.id = g;
    row.bus = net.bus(net.generator(g).bus).id;
    row.p = dispatch.p[g];
    row.alpha = dispatch.alpha[g];
    row.prob_below_min = gens[g].below_min;
    row.prob_above_max = gens[g].above_max;
    r.generators.push_back(row);
  }
  return r;
}

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  std::string s = buf;
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

namespace detail {

namespace {

void dump_into(const ojson& j, int depth, std::string& out) {
  const std::string pad(2 * (depth + 1), ' ');
  const std::string close(2 * depth, ' ');
  switch (j.type()) {
    case ojson::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad + ojson(it.key()).dump() + ": ";
        dump_into(it.value(), depth + 1, out);
      }
      out += "\n" + close + "}";
      return;
    }
    case ojson::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += pad;
        dump_into(j[i], depth + 1, out);
      }
      out += "\n" + close + "]";
      return;
    }
    case ojson::value_t::number_float:
      out += format_real(j.get<double>());
      return;
    default:
      out += j.dump();
  }
}

}  // namespace

std::string dump_json(const ojson& doc) {
  std::string out;
  dump_into(doc, 0, out);
  return out + "\n";
}

}  // namespace detail

std::string write_report(const SolutionReport& r, ReportFormat format) {
  if (format == ReportFormat::Csv) {
    std::string out = "line_id,mean_flow,prob_thermal,prob_sync\n";
    for (const auto& l : r.lines) {
      out += std::to_string(l.id) + "," + format_real(l.mean_flow) + "," + format_real(l.prob_thermal) + "," +
             format_real(l.prob_sync) + "\n";
    }
    return out;
  }
  ojson doc;
  doc["schema_version"] = r.schema_version;
  doc["solver"] = r.solver;
  doc["status"] = r.status;
  doc["objective"] = real(r.objective);
  doc["max_violation"] = real(r.max_violation);
  ojson gens = ojson::array();
  for (const auto& g : r.generators) {
    ojson j;
    j["id"] = g.id;
    j["bus"] = g.bus;
    j["p"] = real(g.p);
    j["alpha"] = real(g.alpha);
    j["prob_below_min"] = real(g.prob_below_min);
    j["prob_above_max"] = real(g.prob_above_max);
    gens.push_back(j);
  }
  doc["generators"] = gens;
  ojson lines = ojson::array();
  for (const auto& l : r.lines) {
    ojson j;
    j["id"] = l.id;
    j["from"] = l.from;
    j["to"] = l.to;
    j["mean_flow"] = real(l.mean_flow);
    j["prob_thermal"] = real(l.prob_thermal);
    j["prob_sync"] = real(l.prob_sync);
    j["prob_thermal_one_sided"] = real(l.prob_thermal_one_sided);
    j["prob_sync_one_sided"] = real(l.prob_sync_one_sided);
    j["thermal_binding"] = l.thermal_binding;
    j["sync_binding"] = l.sync_binding;
    lines.push_back(j);
  }
  doc["lines"] = lines;
  ojson iters = ojson::array();
  for (const auto& it : r.iterations) {
    ojson j;
    j["iteration"] = it.iteration;
    j["constraint"] = it.constraint;
    j["kind"] = it.kind;
    j["violation"] = real(it.violation);
    j["objective"] = real(it.objective);
    iters.push_back(j);
  }
  doc["iterations"] = iters;
  return detail::dump_json(doc);
}

SolutionReport read_report(const std::string& text) {
  const json doc = parse_json(text);
  SolutionReport r;
  r.schema_version = string_field(doc, "schema_version", "report");
  if (r.schema_version != kReportSchema) throw ParseError("report.schema_version: unrecognized version");
  r.solver = string_field(doc, "solver", "report");
  r.status = string_field(doc, "status", "report");
  r.objective = real_field(doc, "objective", "report");
  r.max_violation = real_field(doc, "max_violation", "report");
  const json& jg = array(doc, "generators", "report");
  for (std::size_t i = 0; i < jg.size(); ++i) {
    const std::string ctx = "generators[" + std::to_string(i) + "]";
    ReportGenerator g;
    g.id = static_cast<int>(integer(jg[i], "id", ctx));
    g.bus = static_cast<int>(integer(jg[i], "bus", ctx));
    g.p = real_field(jg[i], "p", ctx);
    g.alpha = real_field(jg[i], "alpha", ctx);
    g.prob_below_min = real_field(jg[i], "prob_below_min", ctx);
    g.prob_above_max = real_field(jg[i], "prob_above_max", ctx);
    r.generators.push_back(g);
  }
  const json& jl = array(doc, "lines", "report");
  for (std::size_t i = 0; i < jl.size(); ++i) {
    const std::string ctx = "lines[" + std::to_string(i) + "]";
    ReportLine l;
    l.id = static_cast<int>(integer(jl[i], "id", ctx));
    l.from = static_cast<int>(integer(jl[i], "from", ctx));
    l.to = static_cast<int>(integer(jl[i], "to", ctx));
    l.mean_flow = real_field(jl[i], "mean_flow", ctx);
    l.prob_thermal = real_field(jl[i], "prob_thermal", ctx);
    l.prob_sync = real_field(jl[i], "prob_sync", ctx);
    l.prob_thermal_one_sided = real_field(jl[i], "prob_thermal_one_sided", ctx);
    l.prob_sync_one_sided = real_field(jl[i], "prob_sync_one_sided", ctx);
    const json& tb = field(jl[i], "thermal_binding", ctx);
    const json& sb = field(jl[i], "sync_binding", ctx);
    if (!tb.is_boolean() || !sb.is_boolean()) throw ParseError(ctx + ": binding flags must be booleans");
    l.thermal_binding = tb.get<bool>();
    l.sync_binding = sb.get<bool>();
    r.lines.push_back(l);
  }
  const json& ji = array(doc, "iterations", "report");
  for (std::size_t i = 0; i < ji.size(); ++i) {
    const std::string ctx = "iterations[" + std::to_string(i) + "]";
    ReportIteration it;
    it.iteration = static_cast<int>(integer(ji[i], "iteration", ctx));
    it.constraint = static_cast<int>(integer(ji[i], "constraint", ctx));
    it.kind = string_field(ji[i], "kind", ctx);
    constraint_kind_from_string(it.kind);
    it.violation = real_field(ji[i], "violation", ctx);
    it.objective = real_field(ji[i], "objective", ctx);
    if (!r.iterations.empty() && it.iteration <= r.iterations.back().iteration) {
      throw ParseError(ctx + ": iteration numbers must increase");
    }
    r.iterations.push_back(it);
  }
  return r;
}

std::vector<ReportLine> read_flow_csv(const std::string& text) {
  std::istringstream in(text);
  std::string row;
  if (!std::getline(in, row) || row != "line_id,mean_flow,prob_thermal,prob_sync") {
    throw ParseError("flow csv: unexpected header");
  }
  std::vector<ReportLine> out;
  int n = 1;
  while (std::getline(in, row)) {
    ++n;
    if (row.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(row);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 4) throw ParseError("flow csv line " + std::to_string(n) + ": expected 4 columns");
    try {
      ReportLine l;
      l.id = std::stoi(cells[0]);
      l.mean_flow = std::stod(cells[1]);
      l.prob_thermal = std::stod(cells[2]);
      l.prob_sync = std::stod(cells[3]);
      out.push_back(l);
    } catch (const std::exception&) {
      throw ParseError("flow csv line " + std::to_string(n) + ": bad number");
    }
  }
  return out;
}

std::string write_iteration_csv(const std::vector<ReportIteration>& log) {
  std::string out = "iteration,line,kind,violation,objective\n";
  for (const auto& it : log) {
    out += std::to_string(it.iteration) + "," + std::to_string(it.constraint) + "," + it.kind + "," +
           format_real(it.violation) + "," + format_real(it.objective) + "\n";
  }
  return out;
}

Dispatch report_dispatch(const SolutionReport& report, const Network& net) {
  if (static_cast<int>(report.generators.size()) != net.num_generators()) {
    throw ValidationError("report generator count does not match the case");
  }
  Dispatch d{VectorXd(net.num_generators()), VectorXd(net.num_generators())};
  for (int g = 0; g < net.num_generators(); ++g) {
    const auto& row = report.generators[g];
    if (row.bus != net.bus(net.generator(g).bus).id) {
      throw ValidationError("report generator " + std::to_string(g) + " sits at a different bus");
    }
    d.p[g] = row.p;
    d.alpha[g] = row.alpha;
  }
  return d;
}

std::string write_mc_report(const McReport& mc, const Certification& cert) {
  ojson doc;
  doc["schema_version"] = kReportSchema;
  doc["samples"] = mc.samples;
  doc["seed"] = mc.seed;
  doc["nonlinear"] = mc.nonlinear;
  auto counts = [&](const EventCount& c) {
    ojson j;
    j["above"] = c.above;
    j["below"] = c.below;
    j["freq_above"] = real(mc.frequency(c.above));
    j["freq_below"] = real(mc.frequency(c.below));
    return j;
  };
  ojson lines = ojson::array();
  for (std::size_t l = 0; l < mc.lines.size(); ++l) {
    ojson j;
    j["id"] = l;
    j["thermal"] = counts(mc.lines[l].thermal_linear);
    j["sync"] = counts(mc.lines[l].sync_linear);
    if (mc.nonlinear) {
      j["thermal_nonlinear"] = counts(mc.lines[l].thermal_nonlinear);
      j["sync_loss_nonlinear"] = mc.lines[l].sync_loss_nonlinear;
    }
    lines.push_back(j);
  }
  doc["lines"] = lines;
  ojson gens = ojson::array();
  for (std::size_t g = 0; g < mc.generators.size(); ++g) {
    ojson j = counts(mc.generators[g]);
    j["id"] = g;
    gens.push_back(j);
  }
  doc["generators"] = gens;
  doc["sync_loss_unattributed"] = mc.sync_loss_unattributed;
  doc["pf_failures"] = mc.pf_failures;
  ojson c;
  c["passed"] = cert.passed;
  ojson entries = ojson::array();
  for (const auto& e : cert.entries) {
    ojson j;
    j["constraint"] = e.constraint;
    j["index"] = e.index;
    j["frequency"] = real(e.frequency);
    j["epsilon"] = real(e.epsilon);
    j["limit"] = real(e.limit);
    j["passed"] = e.passed;
    entries.push_back(j);
  }
  c["entries"] = entries;
  doc["certification"] = c;
  return detail::dump_json(doc);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << contents;
  if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace ccopf
