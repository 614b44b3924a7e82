#pragma once

namespace ccopf {

/// P(Z > z) for a standard normal Z.
double upper_tail(double z);

/// Standard normal density.
double normal_pdf(double z);

/// Gaussian quantile eta(x) solving x = (1 - erf(eta / sqrt 2)) / 2 for 0 < x <= 1/2.
/// Throws DomainError outside that range.
double eta(double x);

/// Inverse of the standard normal CDF for 0 < u < 1.
double normal_quantile(double u);

}  // namespace ccopf
