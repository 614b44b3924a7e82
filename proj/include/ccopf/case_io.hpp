#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ccopf/cc_opf.hpp"
#include "ccopf/mc_validate.hpp"
#include "ccopf/network.hpp"

namespace ccopf {

inline constexpr const char* kCaseSchema = "1.0";
inline constexpr const char* kReportSchema = "1.0";

struct ChanceDefaults {
  double eps_line = 1.0 / 60.0;
  double eps_sync = 1e-4;
  double eps_gen = 1.0 / 60.0;
};

struct CaseFile {
  std::string schema_version = kCaseSchema;
  Network network;
  ChanceDefaults defaults;
  ChanceSpec chance;
};

/// Throws ParseError (with the offending field) or ValidationError.
CaseFile parse_case_text(const std::string& text, const ChanceDefaults& defaults = {});
CaseFile parse_case(const std::string& path, const ChanceDefaults& defaults = {});
/// Canonical JSON for a case; values equal to the defaults are not listed as overrides.
std::string write_case(const CaseFile& c);

/// MATPOWER bus/gen/branch/gencost tables, topology only: beta = 1/x, pbar = rateA/baseMVA.
CaseFile import_matpower_text(const std::string& text, const ChanceDefaults& defaults = {});
CaseFile import_matpower(const std::string& path, const ChanceDefaults& defaults = {});

struct ReportLine {
  int id = 0;
  int from = 0;  // external bus ids
  int to = 0;
  double mean_flow = 0.0;
  double prob_thermal = 0.0;  // exact two-sided
  double prob_sync = 0.0;
  double prob_thermal_one_sided = 0.0;
  double prob_sync_one_sided = 0.0;
  bool thermal_binding = false;
  bool sync_binding = false;

  bool operator==(const ReportLine&) const = default;
};

struct ReportGenerator {
  int id = 0;
  int bus = 0;
  double p = 0.0;
  double alpha = 0.0;
  double prob_below_min = 0.0;
  double prob_above_max = 0.0;

  bool operator==(const ReportGenerator&) const = default;
};

struct ReportIteration {
  int iteration = 0;
  int constraint = 0;  // line or generator index
  std::string kind;    // thermal, sync, gen-min, gen-max
  double violation = 0.0;
  double objective = 0.0;

  bool operator==(const ReportIteration&) const = default;
};

struct SolutionReport {
  std::string schema_version = kReportSchema;
  std::string solver;
  std::string status;
  double objective = 0.0;
  double max_violation = 0.0;
  std::vector<ReportLine> lines;
  std::vector<ReportGenerator> generators;
  std::vector<ReportIteration> iterations;

  bool operator==(const SolutionReport&) const = default;
};

enum class ReportFormat { Json, Csv };

ReportFormat report_format_from_string(const std::string& s);

/// Builds the report rows from a dispatch using the analytic Gaussian probabilities.
SolutionReport make_report(const Network& net, const ChanceSpec& chance, const Dispatch& dispatch,
                           std::string solver, std::string status, double objective);

/// Reals are written with 12 significant digits; key order is fixed.
std::string write_report(const SolutionReport& report, ReportFormat format);
/// Inverse of write_report(.., Json). Throws ParseError.
SolutionReport read_report(const std::string& text);
/// Reads the flow table written by write_report(.., Csv).
std::vector<ReportLine> read_flow_csv(const std::string& text);
/// iteration,line,kind,violation,objective
std::string write_iteration_csv(const std::vector<ReportIteration>& log);

/// Dispatch stored in a report, checked against the network.
Dispatch report_dispatch(const SolutionReport& report, const Network& net);

std::string write_mc_report(const McReport& mc, const Certification& cert);

/// Shortest round-trip-safe text with 12 significant digits.
std::string format_real(double v);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace ccopf
