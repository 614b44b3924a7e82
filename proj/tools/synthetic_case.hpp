#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <utility>

#include "ccopf/case_io.hpp"
#include "ccopf/cc_opf.hpp"
#include "ccopf/det_opf.hpp"
#include "ccopf/errors.hpp"

namespace ccopf::synthetic {

struct Shape {
  int buses = 1000;
  int lines = 1500;
  int generators = 100;
  int wind = 50;
  std::uint64_t seed = 2024;
};

/// Ring-lattice style grid with local chords: buses are joined to nearby
/// indices so paths stay short in angle. A few lines are tightened below
/// their DC flow at an equal-share dispatch so the chance constraints bind.
inline CaseFile make(const Shape& s) {
  std::mt19937_64 rng(s.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<Bus> buses(s.buses);
  for (int i = 0; i < s.buses; ++i) {
    buses[i].id = i + 1;
    buses[i].demand = 0.04 + 0.08 * unit(rng);
  }
  std::vector<int> order(s.buses);
  for (int i = 0; i < s.buses; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  for (int k = 0; k < s.wind; ++k) {
    Bus& b = buses[order[k]];
    b.wind_mean = 0.05;
    b.wind_sigma = 0.01 + 0.02 * unit(rng);
  }

  std::vector<Generator> gens;
  const int stride = std::max(1, s.buses / s.generators);
  for (int g = 0; g < s.generators; ++g) {
    Generator gen;
    gen.bus = (g * stride + stride / 2) % s.buses;
    gen.p_min = 0.0;
    gen.p_max = 1.5;
    gen.c1 = 0.5 + unit(rng);
    gen.c2 = 1.0 + 4.0 * unit(rng);
    gen.c3 = 0.0;
    gens.push_back(gen);
  }

  std::set<std::pair<int, int>> used;
  std::vector<Line> lines;
  std::uniform_real_distribution<double> beta(1.0, 4.0);
  auto add = [&](int a, int b) {
    if (a == b) return false;
    auto key = std::minmax(a, b);
    if (!used.insert(key).second) return false;
    lines.push_back({a, b, beta(rng), 0.0});
    return true;
  };
  for (int i = 1; i < s.buses; ++i) {
    std::uniform_int_distribution<int> back(1, std::min(i, 4));
    add(i, i - back(rng));
  }
  std::uniform_int_distribution<int> any(0, s.buses - 1);
  std::uniform_int_distribution<int> hop(2, 12);
  while (static_cast<int>(lines.size()) < s.lines) {
    const int a = any(rng);
    add(a, (a + hop(rng)) % s.buses);
  }
  for (auto& l : lines) l.pbar = 0.6 * l.beta;

  CaseFile c;
  c.network = Network::build(buses, gens, lines, 0);
  const OpfResult dc = solve_dc_opf(c.network);
  // Tighten the most loaded lines below their unconstrained flow.
  std::vector<int> idx(lines.size());
  for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = static_cast<int>(k);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return std::abs(dc.flows[a]) > std::abs(dc.flows[b]); });
  // Relax the tightening until the chance-constrained problem is feasible.
  for (double factor = 0.9;; factor += 0.1) {
    std::vector<Line> trial = lines;
    for (int k = 0; k < 15; ++k) trial[idx[k]].pbar = factor * std::abs(dc.flows[idx[k]]);
    c.network = Network::build(buses, gens, trial, 0);
    c.chance = ChanceSpec::uniform(c.network, c.defaults.eps_line, c.defaults.eps_sync, c.defaults.eps_gen);
    try {
      solve_cc_opf(c.network, c.chance);
      return c;
    } catch (const Infeasible&) {
      if (factor > 3.0) throw;
    }
  }
}

}  // namespace ccopf::synthetic
