#include "ccopf/mc_validate.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "ccopf/errors.hpp"
#include "ccopf/gaussian.hpp"
#include "ccopf/log.hpp"
#include "ccopf/pf.hpp"

namespace ccopf {

namespace {

constexpr double kZ99 = 2.5758293035489004;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct Partial {
  std::vector<McLineCounts> lines;
  std::vector<EventCount> generators;
  std::int64_t unattributed = 0;
  std::int64_t failures = 0;
};

}  // namespace

double binomial_half_width(double p, std::int64_t samples) {
  if (samples <= 0) return 0.0;
  return kZ99 * std::sqrt(p * (1.0 - p) / static_cast<double>(samples));
}

double gaussian_draw(std::uint64_t seed, std::int64_t sample, int source) {
  std::uint64_t h = splitmix(seed);
  h = splitmix(h ^ static_cast<std::uint64_t>(sample));
  h = splitmix(h ^ static_cast<std::uint64_t>(source));
  const double u = (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
  return normal_quantile(u);
}

McReport run_mc(const Network& net, const Dispatch& dispatch, const McOptions& opt) {
  if (opt.samples < 1) throw DomainError("sample count must be positive");
  if (dispatch.p.size() != net.num_generators() || dispatch.alpha.size() != net.num_generators()) {
    throw DimensionMismatch("dispatch does not match generator count");
  }
  const int n = net.num_buses();
  const int m = net.num_lines();
  const int n_gen = net.num_generators();
  const auto& wind = net.wind_buses();
  const int nw = static_cast<int>(wind.size());
  const MatrixXd& b_red = net.laplacian().reduced_inverse();
  const VectorXd q0 = net.bus_generation(dispatch.p) + net.wind_mean() - net.demand();
  const VectorXd alpha_bus = net.bus_generation(dispatch.alpha);

  McReport rep;
  rep.samples = opt.samples;
  rep.seed = opt.seed;
  rep.nonlinear = opt.nonlinear.value_or(opt.samples <= 10000);

  int workers = opt.threads > 0 ? opt.threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = static_cast<int>(std::clamp<std::int64_t>(workers, 1, opt.samples));

  PfOptions pf_opt;
  pf_opt.thermal_cap = false;

  auto work = [&](std::int64_t begin, std::int64_t end, Partial& part) {
    part.lines.assign(m, {});
    part.generators.assign(n_gen, {});
    VectorXd q(n);
    VectorXd theta(n);
    VectorXd sigma(nw);
    for (int k = 0; k < nw; ++k) sigma[k] = net.bus(wind[k]).wind_sigma;
    for (std::int64_t s = begin; s < end; ++s) {
      double total = 0.0;
      q = q0;
      for (int k = 0; k < nw; ++k) {
        const double w = sigma[k] * gaussian_draw(opt.seed, s, k);
        q[wind[k]] += w;
        total += w;
      }
      q -= total * alpha_bus;
      theta.noalias() = b_red * q;
      for (int l = 0; l < m; ++l) {
        const auto& line = net.line(l);
        const double d = theta[line.from] - theta[line.to];
        const double f = line.beta * d;
        if (f > line.pbar) ++part.lines[l].thermal_linear.above;
        if (f < -line.pbar) ++part.lines[l].thermal_linear.below;
        if (d >= 1.0) ++part.lines[l].sync_linear.above;
        if (d <= -1.0) ++part.lines[l].sync_linear.below;
      }
      for (int g = 0; g < n_gen; ++g) {
        const double out = dispatch.p[g] - total * dispatch.alpha[g];
        const auto& gen = net.generator(g);
        if (out < gen.p_min) ++part.generators[g].below;
        if (out > gen.p_max) ++part.generators[g].above;
      }
      if (!rep.nonlinear) continue;
      try {
        // Balance holds up to rounding; the power flow checks it against 1e-9.
        q.array() -= q.sum() / n;
        FlowState st = solve_pf(net, q, pf_opt);
        if (st.boundary_hit) {
          bool any = false;
          for (int l = 0; l < m; ++l) {
            if (st.at_bound[l]) {
              ++part.lines[l].sync_loss_nonlinear;
              any = true;
            }
          }
          if (!any) ++part.unattributed;
        } else {
          for (int l = 0; l < m; ++l) {
            const auto& line = net.line(l);
            const double f = line.beta * st.rho[l];
            if (f > line.pbar) ++part.lines[l].thermal_nonlinear.above;
            if (f < -line.pbar) ++part.lines[l].thermal_nonlinear.below;
          }
        }
      } catch (const Error& e) {
        ++part.failures;
        log().debug("sample {} power flow failed: {}", s, e.what());
      }
    }
  };

  std::vector<Partial> parts(workers);
  std::vector<std::thread> pool;
  const std::int64_t chunk = (opt.samples + workers - 1) / workers;
  for (int t = 0; t < workers; ++t) {
    const std::int64_t begin = t * chunk;
    const std::int64_t end = std::min(opt.samples, begin + chunk);
    if (t + 1 == workers) {
      work(begin, end, parts[t]);
    } else {
      pool.emplace_back(work, begin, end, std::ref(parts[t]));
    }
  }
  for (auto& th : pool) th.join();

  rep.lines.assign(m, {});
  rep.generators.assign(n_gen, {});
  for (const auto& p : parts) {
    if (p.lines.empty()) continue;
    for (int l = 0; l < m; ++l) {
      rep.lines[l].thermal_linear += p.lines[l].thermal_linear;
      rep.lines[l].sync_linear += p.lines[l].sync_linear;
      rep.lines[l].thermal_nonlinear += p.lines[l].thermal_nonlinear;
      rep.lines[l].sync_loss_nonlinear += p.lines[l].sync_loss_nonlinear;
    }
    for (int g = 0; g < n_gen; ++g) rep.generators[g] += p.generators[g];
    rep.sync_loss_unattributed += p.unattributed;
    rep.pf_failures += p.failures;
  }
  return rep;
}

Certification certify(const McReport& rep, const ChanceSpec& chance) {
  Certification out;
  auto check = [&](std::string name, int index, std::int64_t count, double eps) {
    CertificationEntry e;
    e.constraint = std::move(name);
    e.index = index;
    e.frequency = rep.frequency(count);
    e.epsilon = eps;
    e.limit = eps + binomial_half_width(eps, rep.samples);
    e.passed = e.frequency <= e.limit;
    if (!e.passed) out.passed = false;
    out.entries.push_back(std::move(e));
  };
  if (static_cast<Eigen::Index>(rep.lines.size()) != chance.eps_line.size() ||
      static_cast<Eigen::Index>(rep.generators.size()) != chance.eps_gen.size()) {
    throw DimensionMismatch("chance specification does not match the report");
  }
  for (std::size_t l = 0; l < rep.lines.size(); ++l) {
    const auto& c = rep.lines[l];
    const int i = static_cast<int>(l);
    check("thermal", i, c.thermal_linear.worst_side(), chance.eps_line[i]);
    check("sync", i, c.sync_linear.worst_side(), chance.eps_sync[i]);
    if (rep.nonlinear) {
      check("thermal-nonlinear", i, c.thermal_nonlinear.worst_side(), chance.eps_line[i]);
      check("sync-nonlinear", i, c.sync_loss_nonlinear, chance.eps_sync[i]);
    }
  }
  for (std::size_t g = 0; g < rep.generators.size(); ++g) {
    const int i = static_cast<int>(g);
    check("gen-min", i, rep.generators[g].below, chance.eps_gen[i]);
    check("gen-max", i, rep.generators[g].above, chance.eps_gen[i]);
  }
  return out;
}

}  // namespace ccopf
