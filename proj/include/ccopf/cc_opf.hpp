#pragma once

#include <string_view>
#include <vector>

#include "ccopf/network.hpp"

namespace ccopf {

enum class ConstraintKind { Thermal, Sync, GenMin, GenMax };

std::string_view to_string(ConstraintKind kind);
/// Inverse of to_string; throws ParseError.
ConstraintKind constraint_kind_from_string(std::string_view s);

/// Violation tolerances per line (thermal and sync) and per generator.
struct ChanceSpec {
  VectorXd eps_line;
  VectorXd eps_sync;
  VectorXd eps_gen;

  static ChanceSpec uniform(const Network& net, double line, double sync, double gen);
  /// Throws ValidationError unless every value lies in (0, 0.5] and sizes match.
  void validate(const Network& net) const;
};

/// Precomputed linear maps from (p, alpha) and wind to per-line angle differences.
///
/// mean:   theta_i - theta_j = g_l' p + h_l
/// spread: the coefficient of w_k is W_lk - g_l' alpha
class ChanceModel {
 public:
  explicit ChanceModel(const Network& net);

  const Network& network() const { return *net_; }
  const MatrixXd& mean_gain() const { return gain_; }  // m x G
  const VectorXd& mean_offset() const { return offset_; }
  const MatrixXd& wind_gain() const { return wind_; }  // m x |wind buses|
  const VectorXd& wind_variance() const { return var_; }

  double mean_angle(int line, const VectorXd& p) const;
  /// S_l = sqrt(sum_k sigma_k^2 (W_lk - t)^2) with t = g_l' alpha.
  double angle_std(int line, const VectorXd& alpha) const;
  /// S_l and dS/dt at a given t.
  double angle_std_at(int line, double t, double* slope = nullptr) const;

 private:
  const Network* net_;
  MatrixXd gain_;
  VectorXd offset_;
  MatrixXd wind_;
  VectorXd var_;
};

struct ConicConstraint {
  int line = 0;
  ConstraintKind kind = ConstraintKind::Thermal;
  double bound = 0.0;  // pbar/beta for thermal, 1 for sync
  double eta = 0.0;
};

std::vector<ConicConstraint> conic_constraints(const Network& net, const ChanceSpec& chance);

/// The standard deviation term S of the constraint at a dispatch.
double conic_lhs(const ChanceModel& model, const ConicConstraint& con, const Dispatch& dispatch);

/// |mean| + eta S - bound.
double conic_violation(const ChanceModel& model, const ConicConstraint& con, const Dispatch& dispatch);

struct ViolationProbability {
  double two_sided = 0.0;  // exact Prob(|x| > bound)
  double one_sided = 0.0;  // larger of the two tails
};

/// Gaussian violation probability for mean m and standard deviation s against |x| <= bound.
ViolationProbability analytic_violation_prob(double mean, double std_dev, double bound);
ViolationProbability analytic_violation_prob(const ChanceModel& model, const ConicConstraint& con,
                                             const Dispatch& dispatch);

/// Tangent cut of one line, shared by the thermal and sync constraints of that line.
struct Cut {
  int line = 0;
  ConstraintKind kind = ConstraintKind::Thermal;  // constraint that triggered it
  int iteration = 0;
  double t = 0.0;      // linearization point g_l' alpha
  double value = 0.0;  // S(t)
  double slope = 0.0;  // dS/dt
};

struct IterationEntry {
  int iteration = 0;
  int line = 0;
  ConstraintKind kind = ConstraintKind::Thermal;
  double violation = 0.0;
  double objective = 0.0;
};

struct CcOptions {
  double tol_cut = 1e-7;
  int max_iter = 200;
  /// Add a cut for every violated constraint instead of only the worst one.
  bool all_violated = false;
};

enum class CcStatus { Optimal, IterLimit };

struct LineRisk {
  double mean_flow = 0.0;  // beta (theta_i - theta_j)
  double std_angle = 0.0;
  ViolationProbability thermal;
  ViolationProbability sync;
  bool thermal_binding = false;
  bool sync_binding = false;
};

struct GeneratorRisk {
  double below_min = 0.0;
  double above_max = 0.0;
};

struct CcSolution {
  Dispatch dispatch;
  double objective = 0.0;
  CcStatus status = CcStatus::Optimal;
  int iterations = 0;  // QP solves
  std::vector<IterationEntry> log;
  std::vector<Cut> cuts;
  /// QP objective after each solve.
  std::vector<double> objectives;
  /// max over conic constraints of |mean| + eta S - bound at the returned point.
  double max_violation = 0.0;
  std::vector<LineRisk> lines;
  std::vector<GeneratorRisk> generators;
};

/// Per-line and per-generator risk figures for any dispatch.
void evaluate_risk(const ChanceModel& model, const ChanceSpec& chance, const Dispatch& dispatch,
                   std::vector<LineRisk>& lines, std::vector<GeneratorRisk>& generators,
                   double binding_tol = 1e-6);

/// Chance-constrained OPF by outer linearization of the conic constraints.
/// Throws Infeasible, ValidationError.
CcSolution solve_cc_opf(const Network& net, const ChanceSpec& chance, const CcOptions& options = {});

}  // namespace ccopf
