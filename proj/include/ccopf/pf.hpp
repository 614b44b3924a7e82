#pragma once

#include <vector>

#include "ccopf/network.hpp"

namespace ccopf {

/// psi(x) = integral of arcsin from -1 to x, a convex function on [-1, 1].
double psi(double x);

/// Lossless, voltage-uniform power flow state.
struct FlowState {
  VectorXd rho;    // per line, sin(theta_from - theta_to)
  VectorXd theta;  // per bus, slack angle 0
  bool feasible = false;
  /// The optimum sits on a capacity bound: no synchronous solution within limits.
  bool boundary_hit = false;
  /// Lines whose capacity bound carries a positive multiplier (or, when no
  /// strictly feasible flow exists at all, whose DC flow exceeds the bound).
  std::vector<char> at_bound;
  /// sum_k beta_k psi(rho_k) for solve_pf; the energy function for energy_function_solve.
  double objective = 0.0;
  int iterations = 0;
};

struct PfOptions {
  /// Cap |rho_k| by min(1, pbar_k / beta_k); when false only the sync bound 1 applies.
  bool thermal_cap = true;
  double margin = 1e-6;
  int max_iter = 100;
};

/// Minimizes sum_k beta_k psi(rho_k) subject to flow conservation and
/// |rho_k| <= cap_k - margin, recovering angles from the conservation duals.
/// Throws UnbalancedInjections, DimensionMismatch, NoConvergence.
FlowState solve_pf(const Network& net, const VectorXd& injections, const PfOptions& options = {});

/// E(theta) = sum_k beta_k (1 - cos(theta_i - theta_j)) - sum_i theta_i q_i.
double energy_function(const Network& net, const VectorXd& theta, const VectorXd& injections);

struct EnergyOptions {
  int max_iter = 200;
  double tol = 1e-12;
};

/// Damped Newton on the energy function from theta = 0; its stationary points
/// solve the sine flow equations. Throws NoConvergence.
FlowState energy_function_solve(const Network& net, const VectorXd& injections,
                                const EnergyOptions& options = {});

/// Bus-wise mismatch sum_k beta_k a_ik rho_k - q_i.
VectorXd conservation_residual(const Network& net, const VectorXd& rho, const VectorXd& injections);

}  // namespace ccopf
