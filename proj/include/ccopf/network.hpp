#pragma once

#include <optional>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

namespace ccopf {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Bus {
  int id = 0;
  double demand = 0.0;
  double wind_mean = 0.0;
  double wind_sigma = 0.0;
};

/// Quadratic cost c1 p^2 + c2 p + c3.
struct Generator {
  int bus = 0;  // internal bus index
  double p_min = 0.0;
  double p_max = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;

  double cost(double p) const { return c1 * p * p + c2 * p + c3; }
};

/// Oriented arc from -> to (internal bus indices).
struct Line {
  int from = 0;
  int to = 0;
  double beta = 1.0;
  double pbar = 1.0;
};

/// Generation set points and affine response coefficients, one entry per generator.
struct Dispatch {
  VectorXd p;
  VectorXd alpha;
};

/// Weighted Laplacian B together with the reduced inverse
/// B_red = [[Bhat^-1, 0], [0, 0]] (slack row/column zero).
class Laplacian {
 public:
  Laplacian() = default;
  Laplacian(MatrixXd weighted, int slack);

  const MatrixXd& matrix() const { return b_; }
  const MatrixXd& reduced_inverse() const { return b_red_; }
  int slack() const { return slack_; }

  /// theta = B_red q. For balanced q this solves B theta = q with theta_slack = 0.
  VectorXd apply_reduced_inverse(const VectorXd& q) const;

 private:
  MatrixXd b_;
  MatrixXd b_red_;
  int slack_ = 0;
};

/// Immutable grid description. Buses are addressed by internal index
/// 0..n-1; the external id of each bus is kept for reporting.
class Network {
 public:
  /// Validates the data, merges parallel lines and factors the Laplacian.
  /// Generator and line endpoints are internal bus indices. When
  /// slack is empty the bus with the largest external id is used.
  static Network build(std::vector<Bus> buses, std::vector<Generator> generators,
                       std::vector<Line> lines, std::optional<int> slack = std::nullopt);

  int num_buses() const { return static_cast<int>(buses_.size()); }
  int num_lines() const { return static_cast<int>(lines_.size()); }
  int num_generators() const { return static_cast<int>(generators_.size()); }

  const std::vector<Bus>& buses() const { return buses_; }
  const std::vector<Generator>& generators() const { return generators_; }
  const std::vector<Line>& lines() const { return lines_; }
  const Bus& bus(int i) const { return buses_[i]; }
  const Generator& generator(int g) const { return generators_[g]; }
  const Line& line(int k) const { return lines_[k]; }

  int slack() const { return laplacian_.slack(); }
  const Laplacian& laplacian() const { return laplacian_; }

  /// Internal index of the bus with external id, or -1.
  int bus_index(int id) const;

  /// u_k = min(1, pbar_k / beta_k), the capacity expressed as an angle-sine bound.
  double effective_capacity(int k) const;
  double beta_max() const;

  VectorXd demand() const;
  VectorXd wind_mean() const;
  VectorXd wind_sigma() const;
  /// Buses with sigma > 0, in index order.
  const std::vector<int>& wind_buses() const { return wind_buses_; }
  double total_wind_variance() const;

  /// Node-arc incidence matrix (n x m), +1 at the from bus and -1 at the to bus.
  MatrixXd incidence() const;
  /// Generator-to-bus map (n x G).
  MatrixXd generator_map() const;
  /// Bus injections C p for per-generator values.
  VectorXd bus_generation(const VectorXd& per_generator) const;

 private:
  std::vector<Bus> buses_;
  std::vector<Generator> generators_;
  std::vector<Line> lines_;
  std::vector<int> wind_buses_;
  Laplacian laplacian_;
};

/// Weighted Laplacian and reduced inverse for the network's topology.
Laplacian build_laplacian(const std::vector<Bus>& buses, const std::vector<Line>& lines,
                          int slack);

/// q_i = p_i - (e^T w) alpha_i - d_i + mu_i + w_i with generator terms summed per bus.
VectorXd injection_vector(const Network& net, const Dispatch& dispatch, const VectorXd& wind);

}  // namespace ccopf
