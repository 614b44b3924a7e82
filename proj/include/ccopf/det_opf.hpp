#pragma once

#include <optional>
#include <vector>

#include "ccopf/network.hpp"
#include "ccopf/pf.hpp"

namespace ccopf {

/// Sum of quadratic generator costs, constant terms included.
double generation_cost(const Network& net, const VectorXd& p);

/// Linear angles theta = B_red (C p + mu - d) for a set-point vector.
VectorXd dc_angles(const Network& net, const VectorXd& p);

struct OpfResult {
  Dispatch dispatch;  // alpha is zero
  VectorXd theta;     // linear angles, slack 0
  VectorXd flows;     // beta_k (theta_i - theta_j)
  /// Multiplier of the per-line angle bound (upper minus lower side).
  VectorXd line_duals;
  double objective = 0.0;
  int qp_iterations = 0;

  // SCOPF only: outcome of recovering true angles with solve_pf.
  bool sync_recovered = true;
  std::optional<FlowState> recovery;
};

/// min f(p) s.t. balance, |beta (theta_i - theta_j)| <= pbar, generator bounds.
/// Throws Infeasible.
OpfResult solve_dc_opf(const Network& net);

struct ScopfOptions {
  double margin = 1e-6;
  /// Throw SyncRecoveryFailed instead of flagging the result.
  bool strict_recovery = false;
};

/// DC-OPF plus |theta_i - theta_j| <= min(pbar/beta, 1) - margin, followed by
/// angle recovery on the resulting injections. Throws Infeasible, SyncRecoveryFailed.
OpfResult solve_scopf(const Network& net, const ScopfOptions& options = {});

struct BarrierConfig {
  double epsilon = 0.01;
  /// Lower bound C on the optimal cost; the DC-OPF optimum when empty.
  std::optional<double> cost_lower_bound;
  double divergence_factor = 1e6;
  int max_newton = 400;
};

/// D = C eps / (pi beta_max).
double barrier_d(const Network& net, double epsilon, double cost_lower_bound);
/// phi = beta_max / (m log(1/eps)).
double barrier_phi(const Network& net, double epsilon);

/// |sin(theta_i - theta_j)| <= (1 - eps) u_k on every line, given rho = sin(...).
bool slacksine_holds(const Network& net, const VectorXd& rho, double epsilon);

struct BarrierResult {
  Dispatch dispatch;
  VectorXd rho;
  VectorXd delta;
  /// Conservation duals scaled by 1/D, slack angle 0.
  VectorXd theta;
  double cost = 0.0;       // f(p)
  double objective = 0.0;  // full barrier objective K
  double C = 0.0;
  double D = 0.0;
  double phi = 0.0;

  /// Upper bound for f(p): K + D (pi/2 - 1) sum beta, since psi >= 1 - pi/2.
  double cost_bound = 0.0;
  bool cost_bound_holds = false;
  /// solve_pf on the returned injections is strictly inside the capacities.
  bool sync_feasible = false;

  /// min_k (1 - |rho_k| / u_k).
  double separation = 0.0;
  /// |arcsin(rho_k) - (theta_i - theta_j)| per line.
  VectorXd residual;
  /// phi / (u_k separation); equals beta_max / (m u_k sep log(1/eps)).
  VectorXd residual_bound;
  bool residual_within_bound = false;

  /// Reference optimum from SCOPF followed by angle recovery, when available.
  std::optional<double> reference_cost;
  /// The reference flows satisfy the slack condition, so cost <= (1 + 2 eps) reference.
  bool guarantee_applies = false;

  /// Objective after each centering stage, and the barrier merit after every Newton step.
  std::vector<double> path;
  std::vector<double> merit;
  std::vector<int> merit_stage;
  int newton_iterations = 0;
};

/// Barrier convexification of the lossless, voltage-uniform OPF.
/// Throws Infeasible, BarrierDivergence, NoConvergence.
BarrierResult solve_barrier_opf(const Network& net, const BarrierConfig& config = {});

}  // namespace ccopf
