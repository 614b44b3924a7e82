#pragma once

#include "ccopf/network.hpp"

namespace ccopf {

enum class InstantonStatus { Ok, ZeroVariance };

struct InstantonResult {
  /// min sum_i omega_i^2 / (2 sigma_i^2); +inf for ZeroVariance with a nonzero gap.
  double energy = 0.0;
  /// Minimizing fluctuation, ordered as Network::wind_buses().
  VectorXd omega;
  /// Multiplier of the threshold constraint.
  double phi = 0.0;
  InstantonStatus status = InstantonStatus::Ok;
  /// Worst residual of the constraints at omega.
  double residual = 0.0;
  int iterations = 0;
};

/// DC instanton for the event beta_l (theta_from - theta_to) = rho_threshold on one line.
InstantonResult e_dc_closed_form(const Network& net, const Dispatch& dispatch, int line, double rho_threshold);

/// E >= log(1/eps).
bool ld_condition_check(double energy, double epsilon);

struct InstantonOptions {
  int max_iter = 100;
  double tol = 1e-10;
};

/// Local minimizer of the same energy subject to the sine flow equations,
/// started from the DC instanton. Non-convex: the result is a local optimum.
/// Throws DomainError when |rho_threshold| >= beta_l, NoConvergence.
InstantonResult nonlinear_instanton(const Network& net, const Dispatch& dispatch, int line, double rho_threshold,
                                    const InstantonOptions& options = {});

}  // namespace ccopf
