#include "ccopf/gaussian.hpp"

#include <cmath>
#include <numbers>

#include "ccopf/errors.hpp"

namespace ccopf {

namespace {

// Acklam's rational approximation to the lower-tail quantile, |rel err| < 1.2e-9.
double acklam_lower(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double upper_tail(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

double eta(double x) {
  if (!(x > 0.0 && x <= 0.5)) throw DomainError("eta is defined on (0, 0.5]");
  if (x == 0.5) return 0.0;

  // Newton on log Q(eta) = log x, safeguarded by bisection on [lo, hi].
  double lo = 0.0;
  double hi = 40.0;
  double z = -acklam_lower(x);
  if (!(z > lo && z < hi)) z = 0.5 * (lo + hi);
  const double target = std::log(x);
  for (int it = 0; it < 100; ++it) {
    const double tail = upper_tail(z);
    const double g = std::log(tail) - target;
    if (g > 0.0) {
      lo = z;  // tail too heavy: move right
    } else {
      hi = z;
    }
    const double step = g * tail / normal_pdf(z);
    double next = z + step;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - z) <= 1e-15 * std::max(1.0, z)) return next;
    z = next;
  }
  return z;
}

double normal_quantile(double u) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("normal quantile is defined on (0, 1)");
  if (u < 0.5) return -eta(u);
  if (u > 0.5) return eta(1.0 - u);
  return 0.0;
}

}  // namespace ccopf
