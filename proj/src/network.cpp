#include "ccopf/network.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <string>
#include <utility>

#include "ccopf/errors.hpp"
#include "ccopf/log.hpp"

namespace ccopf {

namespace {

bool connected(int n, const std::vector<Line>& lines) {
  if (n == 0) return false;
  std::vector<std::vector<int>> adj(n);
  for (const auto& l : lines) {
    adj[l.from].push_back(l.to);
    adj[l.to].push_back(l.from);
  }
  std::vector<char> seen(n, 0);
  std::queue<int> todo;
  todo.push(0);
  seen[0] = 1;
  int count = 1;
  while (!todo.empty()) {
    int v = todo.front();
    todo.pop();
    for (int w : adj[v]) {
      if (!seen[w]) {
        seen[w] = 1;
        ++count;
        todo.push(w);
      }
    }
  }
  return count == n;
}

}  // namespace

Laplacian::Laplacian(MatrixXd weighted, int slack) : b_(std::move(weighted)), slack_(slack) {
  const Eigen::Index n = b_.rows();
  b_red_ = MatrixXd::Zero(n, n);
  if (n == 1) return;

  std::vector<Eigen::Index> keep;
  keep.reserve(n - 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i != slack_) keep.push_back(i);
  }
  MatrixXd reduced(n - 1, n - 1);
  for (Eigen::Index a = 0; a < n - 1; ++a) {
    for (Eigen::Index b = 0; b < n - 1; ++b) reduced(a, b) = b_(keep[a], keep[b]);
  }
  Eigen::LLT<MatrixXd> llt(reduced);
  if (llt.info() != Eigen::Success) {
    throw DisconnectedGraph("reduced Laplacian is not positive definite");
  }
  MatrixXd inv = llt.solve(MatrixXd::Identity(n - 1, n - 1));
  for (Eigen::Index a = 0; a < n - 1; ++a) {
    for (Eigen::Index b = 0; b < n - 1; ++b) b_red_(keep[a], keep[b]) = inv(a, b);
  }
}

VectorXd Laplacian::apply_reduced_inverse(const VectorXd& q) const {
  if (q.size() != b_red_.rows()) {
    throw DimensionMismatch("injection vector has wrong length");
  }
  return b_red_ * q;
}

Laplacian build_laplacian(const std::vector<Bus>& buses, const std::vector<Line>& lines,
                          int slack) {
  const int n = static_cast<int>(buses.size());
  for (const auto& l : lines) {
    if (!(l.beta > 0.0) || !std::isfinite(l.beta)) {
      throw NonPositiveSusceptance("line " + std::to_string(l.from) + "-" +
                                   std::to_string(l.to) + " has non-positive susceptance");
    }
  }
  if (!connected(n, lines)) throw DisconnectedGraph("network graph is not connected");
  MatrixXd b = MatrixXd::Zero(n, n);
  for (const auto& l : lines) {
    b(l.from, l.from) += l.beta;
    b(l.to, l.to) += l.beta;
    b(l.from, l.to) -= l.beta;
    b(l.to, l.from) -= l.beta;
  }
  return Laplacian(std::move(b), slack);
}

Network Network::build(std::vector<Bus> buses, std::vector<Generator> generators,
                       std::vector<Line> lines, std::optional<int> slack) {
  const int n = static_cast<int>(buses.size());
  if (n == 0) throw ValidationError("network has no buses");
  for (const auto& b : buses) {
    if (!std::isfinite(b.demand) || !std::isfinite(b.wind_mean) || !std::isfinite(b.wind_sigma)) {
      throw ValidationError("bus " + std::to_string(b.id) + " has non-finite data");
    }
    if (b.wind_sigma < 0.0) {
      throw ValidationError("bus " + std::to_string(b.id) + " has negative sigma");
    }
  }
  for (const auto& g : generators) {
    if (g.bus < 0 || g.bus >= n) throw ValidationError("generator at nonexistent bus");
    if (g.p_min > g.p_max) throw ValidationError("generator has p_min > p_max");
    if (g.c1 < 0.0) throw ValidationError("generator has negative quadratic cost");
  }

  // Parallel lines collapse onto the first-seen orientation.
  std::map<std::pair<int, int>, std::size_t> seen;
  std::vector<Line> merged;
  for (const auto& l : lines) {
    if (l.from < 0 || l.from >= n || l.to < 0 || l.to >= n) {
      throw ValidationError("line references nonexistent bus");
    }
    if (l.from == l.to) throw ValidationError("line is a self loop");
    if (!(l.beta > 0.0)) throw NonPositiveSusceptance("line has non-positive susceptance");
    if (!(l.pbar > 0.0)) throw ValidationError("line has non-positive capacity");
    auto key = std::minmax(l.from, l.to);
    auto it = seen.find(key);
    if (it == seen.end()) {
      seen.emplace(key, merged.size());
      merged.push_back(l);
    } else {
      log().info("merging parallel line {}-{}", l.from, l.to);
      merged[it->second].beta += l.beta;
      merged[it->second].pbar += l.pbar;
    }
  }

  int slack_index = 0;
  if (slack) {
    if (*slack < 0 || *slack >= n) throw ValidationError("slack bus out of range");
    slack_index = *slack;
  } else {
    for (int i = 1; i < n; ++i) {
      if (buses[i].id > buses[slack_index].id) slack_index = i;
    }
  }

  Network net;
  net.laplacian_ = build_laplacian(buses, merged, slack_index);
  net.buses_ = std::move(buses);
  net.generators_ = std::move(generators);
  net.lines_ = std::move(merged);
  for (int i = 0; i < n; ++i) {
    if (net.buses_[i].wind_sigma > 0.0) net.wind_buses_.push_back(i);
  }
  return net;
}

int Network::bus_index(int id) const {
  for (int i = 0; i < num_buses(); ++i) {
    if (buses_[i].id == id) return i;
  }
  return -1;
}

double Network::effective_capacity(int k) const {
  return std::min(1.0, lines_[k].pbar / lines_[k].beta);
}

double Network::beta_max() const {
  double m = 0.0;
  for (const auto& l : lines_) m = std::max(m, l.beta);
  return m;
}

VectorXd Network::demand() const {
  VectorXd v(num_buses());
  for (int i = 0; i < num_buses(); ++i) v[i] = buses_[i].demand;
  return v;
}

VectorXd Network::wind_mean() const {
  VectorXd v(num_buses());
  for (int i = 0; i < num_buses(); ++i) v[i] = buses_[i].wind_mean;
  return v;
}

VectorXd Network::wind_sigma() const {
  VectorXd v(num_buses());
  for (int i = 0; i < num_buses(); ++i) v[i] = buses_[i].wind_sigma;
  return v;
}

double Network::total_wind_variance() const {
  double s = 0.0;
  for (const auto& b : buses_) s += b.wind_sigma * b.wind_sigma;
  return s;
}

MatrixXd Network::incidence() const {
  MatrixXd a = MatrixXd::Zero(num_buses(), num_lines());
  for (int k = 0; k < num_lines(); ++k) {
    a(lines_[k].from, k) = 1.0;
    a(lines_[k].to, k) = -1.0;
  }
  return a;
}

MatrixXd Network::generator_map() const {
  MatrixXd c = MatrixXd::Zero(num_buses(), num_generators());
  for (int g = 0; g < num_generators(); ++g) c(generators_[g].bus, g) = 1.0;
  return c;
}

VectorXd Network::bus_generation(const VectorXd& per_generator) const {
  if (per_generator.size() != num_generators()) {
    throw DimensionMismatch("generator vector has wrong length");
  }
  VectorXd out = VectorXd::Zero(num_buses());
  for (int g = 0; g < num_generators(); ++g) out[generators_[g].bus] += per_generator[g];
  return out;
}

VectorXd injection_vector(const Network& net, const Dispatch& dispatch, const VectorXd& wind) {
  if (dispatch.p.size() != net.num_generators() || dispatch.alpha.size() != net.num_generators()) {
    throw DimensionMismatch("dispatch does not match generator count");
  }
  if (wind.size() != net.num_buses()) throw DimensionMismatch("wind vector has wrong length");
  const double total = wind.sum();
  VectorXd q = net.bus_generation(dispatch.p - total * dispatch.alpha);
  q += wind + net.wind_mean() - net.demand();
  return q;
}

}  // namespace ccopf
