#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ccopf/cc_opf.hpp"
#include "ccopf/network.hpp"

namespace ccopf {

/// Exceedances on the positive and the negative side of a two-sided limit.
struct EventCount {
  std::int64_t above = 0;
  std::int64_t below = 0;

  std::int64_t total() const { return above + below; }
  std::int64_t worst_side() const { return above > below ? above : below; }
  EventCount& operator+=(const EventCount& o) {
    above += o.above;
    below += o.below;
    return *this;
  }
};

struct McLineCounts {
  EventCount thermal_linear;     // |beta (theta_i - theta_j)| > pbar
  EventCount sync_linear;        // |theta_i - theta_j| >= 1
  EventCount thermal_nonlinear;  // |beta sin(theta_i - theta_j)| > pbar
  std::int64_t sync_loss_nonlinear = 0;  // the sine flow pins this line at its limit
};

struct McReport {
  std::int64_t samples = 0;
  std::uint64_t seed = 0;
  bool nonlinear = false;
  std::vector<McLineCounts> lines;
  std::vector<EventCount> generators;  // below = under p_min, above = over p_max
  /// Samples without a synchronous solution but no line singled out.
  std::int64_t sync_loss_unattributed = 0;
  /// Samples where the power flow solve itself failed.
  std::int64_t pf_failures = 0;

  double frequency(std::int64_t count) const { return samples ? double(count) / double(samples) : 0.0; }
};

/// Half-width of the 99% normal-approximation binomial interval around p.
double binomial_half_width(double p, std::int64_t samples);

struct McOptions {
  std::int64_t samples = 100000;
  std::uint64_t seed = 1;
  /// Run the sine power flow per sample; defaults to on only up to 1e4 samples.
  std::optional<bool> nonlinear;
  /// 0 picks the hardware concurrency.
  int threads = 0;
};

/// Standard normal draw for (seed, sample, source), independent of evaluation order.
double gaussian_draw(std::uint64_t seed, std::int64_t sample, int source);

McReport run_mc(const Network& net, const Dispatch& dispatch, const McOptions& options = {});

struct CertificationEntry {
  std::string constraint;  // "thermal", "sync", "gen-min", "gen-max" and the map used
  int index = 0;           // line or generator
  double frequency = 0.0;  // worst one-sided empirical frequency
  double epsilon = 0.0;
  double limit = 0.0;      // epsilon + 99% half-width
  bool passed = true;
};

struct Certification {
  bool passed = true;
  std::vector<CertificationEntry> entries;
};

/// Compare every one-sided empirical frequency with its tolerance plus the 99% half-width.
Certification certify(const McReport& report, const ChanceSpec& chance);

}  // namespace ccopf
