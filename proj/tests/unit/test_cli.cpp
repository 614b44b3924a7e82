#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "ccopf/case_io.hpp"
#include "ccopf/cli.hpp"
#include "json.hpp"

using namespace ccopf;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "ccopf_cli_tests";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

}  // namespace

TEST_CASE("solve ccopf on the nine-bus case") {
  const std::string out = temp_path("nine.json");
  const std::string plot = temp_path("nine_iters.csv");
  Run r = call({"solve", "ccopf", "--case", "data/nine_bus.json", "--out", out, "--emit-plot-data", plot});
  CHECK(r.code == cli::kOk);
  CHECK(r.out.empty());
  SolutionReport rep = read_report(read_file(out));
  CHECK(rep.status == "optimal");
  CHECK(rep.solver == "ccopf");
  CHECK(rep.lines.size() == 9);
  CHECK_FALSE(rep.iterations.empty());
  const std::string csv = read_file(plot);
  CHECK(csv.rfind("iteration,line,kind,violation,objective\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(rep.iterations.size()) + 1);

  Run again = call({"solve", "ccopf", "--case", "data/nine_bus.json"});
  CHECK(again.code == cli::kOk);
  CHECK(again.out == read_file(out));
}

TEST_CASE("exit codes") {
  CHECK(call({"solve", "dc", "--case", "data/infeasible.json"}).code == cli::kInfeasible);
  CHECK(call({"solve", "scopf", "--case", "data/infeasible.json"}).code == cli::kInfeasible);
  CHECK(call({"solve", "ccopf", "--case", "data/infeasible.json"}).code == cli::kInfeasible);
  CHECK(call({"solve", "dc", "--case", "data/nine_bus.json"}).code == cli::kOk);
  CHECK(call({"solve", "barrier", "--case", "data/tree.json"}).code == cli::kOk);

  Run limited = call({"solve", "ccopf", "--case", "data/nine_bus.json", "--max-iters", "2"});
  CHECK(limited.code == cli::kNoConvergence);
  CHECK(read_report(limited.out).status == "iteration-limit");

  CHECK(call({}).code == cli::kUsage);
  CHECK(call({"solve", "ccopf"}).code == cli::kUsage);
  CHECK(call({"solve", "acopf", "--case", "data/nine_bus.json"}).code == cli::kUsage);
  CHECK(call({"solve", "dc", "--case", "data/missing.json"}).code == cli::kUsage);
  CHECK(call({"solve", "dc", "--case", "data/nine_bus.json", "--eps-line", "0.9"}).code == cli::kUsage);
  CHECK(call({"--help"}).code == cli::kOk);
  Run bad = call({"solve", "dc", "--case", "data/missing.json"});
  CHECK(bad.out.empty());
  CHECK_FALSE(bad.err.empty());
}

TEST_CASE("csv output") {
  Run r = call({"solve", "ccopf", "--case", "data/nine_bus.json", "--format", "csv"});
  CHECK(r.code == cli::kOk);
  CHECK(read_flow_csv(r.out).size() == 9);
}

TEST_CASE("scopf on a tree agrees with the pf command") {
  const std::string rep_path = temp_path("tree_scopf.json");
  REQUIRE(call({"solve", "scopf", "--case", "data/tree.json", "--out", rep_path}).code == cli::kOk);
  const SolutionReport rep = read_report(read_file(rep_path));
  Run pf = call({"pf", "--case", "data/tree.json", "--report", rep_path});
  REQUIRE(pf.code == cli::kOk);
  const auto doc = nlohmann::json::parse(pf.out);
  REQUIRE(doc["flows"].size() == rep.lines.size());
  for (std::size_t l = 0; l < rep.lines.size(); ++l) {
    CHECK(doc["flows"][l].get<double>() == doctest::Approx(rep.lines[l].mean_flow).epsilon(1e-9));
  }
}

TEST_CASE("pf command") {
  const std::string ok = temp_path("inj_ok.json");
  const std::string over = temp_path("inj_over.json");
  write_file(ok, "[0.5, -0.5]");
  write_file(over, "[1.5, -1.5]");
  Run a = call({"pf", "--case", "data/two_bus.json", "--injections", ok});
  CHECK(a.code == cli::kOk);
  const auto doc = nlohmann::json::parse(a.out);
  CHECK(doc["feasible"].get<bool>());
  CHECK(doc["rho"][0].get<double>() == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(call({"pf", "--case", "data/two_bus.json", "--injections", over}).code == cli::kInfeasible);
  CHECK(call({"pf", "--case", "data/two_bus.json"}).code == cli::kUsage);
}

TEST_CASE("validate command") {
  const std::string rep_path = temp_path("nine_for_mc.json");
  REQUIRE(call({"solve", "ccopf", "--case", "data/nine_bus.json", "--out", rep_path}).code == cli::kOk);
  Run v = call({"validate", "--case", "data/nine_bus.json", "--report", rep_path, "--samples", "20000", "--seed", "5"});
  CHECK(v.code == cli::kOk);
  const auto doc = nlohmann::json::parse(v.out);
  CHECK(doc["certification"]["passed"].get<bool>());
  CHECK(doc["samples"].get<int>() == 20000);
  Run again = call({"validate", "--case", "data/nine_bus.json", "--report", rep_path, "--samples", "20000", "--seed", "5"});
  CHECK(again.out == v.out);

  // Solved for a loose tolerance, checked against the case's tighter one.
  const std::string loose = temp_path("nine_loose.json");
  REQUIRE(call({"solve", "ccopf", "--case", "data/nine_bus.json", "--eps-line", "0.25", "--out", loose}).code ==
          cli::kOk);
  CHECK(call({"validate", "--case", "data/nine_bus.json", "--report", loose, "--samples", "20000"}).code ==
        cli::kCertificationFailed);
}

TEST_CASE("risk command") {
  const std::string rep_path = temp_path("two_bus_rep.json");
  REQUIRE(call({"solve", "ccopf", "--case", "data/two_bus.json", "--out", rep_path}).code == cli::kOk);
  Run r = call({"risk", "--case", "data/two_bus.json", "--report", rep_path, "--line", "0", "--rho", "0.7"});
  const auto doc = nlohmann::json::parse(r.out);
  const double e = doc["energy_dc"].get<double>();
  CHECK(doc["threshold"].get<double>() == doctest::Approx(std::log(60.0)));
  CHECK(r.code == (e >= std::log(60.0) ? cli::kOk : cli::kCertificationFailed));
  Run far = call({"risk", "--case", "data/two_bus.json", "--report", rep_path, "--line", "0", "--rho", "0.99",
                  "--nonlinear"});
  CHECK(far.code == cli::kOk);
  CHECK(nlohmann::json::parse(far.out).contains("energy_nonlinear"));
  CHECK(call({"risk", "--case", "data/two_bus.json", "--report", rep_path, "--line", "4"}).code == cli::kUsage);
}
