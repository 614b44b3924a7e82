#pragma once

// Random instance generators shared by the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "ccopf/network.hpp"

namespace ccopf::testing {

/// Random spanning tree plus extra edges; beta uniform in [beta_lo, beta_hi].
inline std::vector<Line> random_connected_lines(int n, int extra, std::mt19937_64& rng,
                                                double beta_lo = 0.5, double beta_hi = 2.0) {
  std::uniform_real_distribution<double> beta(beta_lo, beta_hi);
  std::vector<Line> lines;
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (int i = 1; i < n; ++i) {
    std::uniform_int_distribution<int> pick(0, i - 1);
    lines.push_back({order[pick(rng)], order[i], beta(rng), 100.0});
  }
  std::uniform_int_distribution<int> node(0, n - 1);
  int attempts = 0;
  while (extra > 0 && attempts < 100 * (extra + 1)) {
    ++attempts;
    int a = node(rng);
    int b = node(rng);
    if (a == b) continue;
    bool dup = false;
    for (const auto& l : lines) {
      if ((l.from == a && l.to == b) || (l.from == b && l.to == a)) dup = true;
    }
    if (dup) continue;
    lines.push_back({a, b, beta(rng), 100.0});
    --extra;
  }
  return lines;
}

inline std::vector<Bus> plain_buses(int n) {
  std::vector<Bus> buses(n);
  for (int i = 0; i < n; ++i) buses[i].id = i + 1;
  return buses;
}

/// Balanced injections scaled so that the DC angle differences stay below max_angle.
inline VectorXd random_balanced_injections(const Network& net, double max_angle, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  const int n = net.num_buses();
  VectorXd q(n);
  for (int i = 0; i < n; ++i) q[i] = nd(rng);
  q.array() -= q.mean();
  VectorXd theta = net.laplacian().apply_reduced_inverse(q);
  double worst = 0.0;
  for (const auto& l : net.lines()) worst = std::max(worst, std::abs(theta[l.from] - theta[l.to]));
  if (worst > 0.0) q *= max_angle / worst;
  return q;
}

}  // namespace ccopf::testing
