#pragma once

#include "qfl/errors.hpp"
#include "qfl/wireless_net.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace qfl {

using BitString = std::vector<std::uint8_t>;

template <typename Scalar>
struct QuadTerm {
  int i;
  int j;
  Scalar coeff;
};

/// Quadratic form over binary variables:
///   energy(x) = offset + sum_i linear_i x_i + sum_{i<j} quad_ij x_i x_j.
/// Quadratic coefficients live in the strict upper triangle of a dense matrix.
template <typename Scalar>
class BasicQubo {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  BasicQubo() = default;
  explicit BasicQubo(int n, Scalar offset = Scalar(0))
      : linear_(Vector::Zero(n)), upper_(Matrix::Zero(n, n)), offset_(offset) {
    require(n >= 0, "qubo size must be non-negative");
  }

  int size() const { return static_cast<int>(linear_.size()); }
  Scalar offset() const { return offset_; }
  void set_offset(Scalar c) { offset_ = c; }
  void add_offset(Scalar c) { offset_ += c; }

  const Vector& linear() const { return linear_; }
  Scalar linear(int i) const { return linear_[i]; }
  void add_linear(int i, Scalar c) {
    check_index(i);
    linear_[i] += c;
  }

  /// Strictly upper-triangular coefficient matrix.
  const Matrix& upper() const { return upper_; }
  Scalar quadratic(int i, int j) const {
    check_index(i);
    check_index(j);
    if (i == j) return Scalar(0);
    return i < j ? upper_(i, j) : upper_(j, i);
  }
  /// x_i x_j with i == j folds into the linear term (x^2 = x).
  void add_quadratic(int i, int j, Scalar c) {
    check_index(i);
    check_index(j);
    if (i == j) {
      linear_[i] += c;
    } else if (i < j) {
      upper_(i, j) += c;
    } else {
      upper_(j, i) += c;
    }
  }

  /// Nonzero quadratic terms with i < j, row-major order.
  std::vector<QuadTerm<Scalar>> quad_terms() const {
    std::vector<QuadTerm<Scalar>> out;
    for (int i = 0; i < size(); ++i)
      for (int j = i + 1; j < size(); ++j)
        if (upper_(i, j) != Scalar(0)) out.push_back({i, j, upper_(i, j)});
    return out;
  }

  /// Energy of the basis state whose bit i is variable i.
  Scalar energy_of_index(std::uint64_t bits) const {
    Scalar e = offset_;
    for (int i = 0; i < size(); ++i) {
      if (!((bits >> i) & 1U)) continue;
      e += linear_[i];
      for (int j = i + 1; j < size(); ++j)
        if ((bits >> j) & 1U) e += upper_(i, j);
    }
    return e;
  }

 private:
  void check_index(int i) const {
    require(i >= 0 && i < size(), "qubo variable index " + std::to_string(i) + " out of range");
  }

  Vector linear_;
  Matrix upper_;
  Scalar offset_ = Scalar(0);
};

using Qubo = BasicQubo<double>;

template <typename Scalar>
Scalar energy(const BasicQubo<Scalar>& q, std::span<const std::uint8_t> x) {
  require(static_cast<int>(x.size()) == q.size(),
          "bitstring length " + std::to_string(x.size()) + " != qubo size " + std::to_string(q.size()));
  Scalar e = q.offset();
  for (int i = 0; i < q.size(); ++i) {
    if (!x[static_cast<std::size_t>(i)]) continue;
    e += q.linear(i);
    for (int j = i + 1; j < q.size(); ++j)
      if (x[static_cast<std::size_t>(j)]) e += q.upper()(i, j);
  }
  return e;
}

/// Bit i of `bits` becomes x[i].
BitString bits_from_index(std::uint64_t bits, int n);
std::uint64_t index_from_bits(std::span<const std::uint8_t> x);

/// Max single-flip |delta| bound: max_i (|linear_i| + sum_j |quad_ij|).
double flip_scale(const Qubo& q);

struct QuboSolution {
  BitString x;
  double value = 0.0;
};

/// (energy, lexicographic bitstring) ordering used to merge solver results.
bool better_solution(const QuboSolution& a, const QuboSolution& b);

inline constexpr int kBruteForceMaxVars = 24;

/// Exhaustive global minimum; ties go to the lexicographically smallest x.
QuboSolution brute_force_min(const Qubo& q);

/// Exhaustive maximum energy (same enumeration as brute_force_min).
double brute_force_max(const Qubo& q);

struct AnnealConfig {
  int sweeps = 2000;
  int restarts = 20;
  /// Temperatures relative to flip_scale(q); geometric from start to end.
  double t_start = 0.5;
  double t_end = 1e-3;
  std::uint64_t seed = 0;
};

/// Single-flip Metropolis simulated annealing; best state seen over all restarts.
QuboSolution anneal_min(const Qubo& q, const AnnealConfig& cfg);

/// Dense Qubo with linear and quadratic coefficients uniform in [-1, 1].
Qubo random_qubo(int n, std::uint64_t seed);

nlohmann::json to_json(const Qubo& q);
Qubo qubo_from_json(const nlohmann::json& j);

// --- channel-assignment encoding ---------------------------------------------

struct AssignmentVar {
  int device;
  int channel;
};

enum class InterferenceProxy {
  ReceivedPower,     // p_i g_ik + p_j g_jk, watts
  PairwiseRateLoss,  // rate lost by the pair when sharing channel k, bit/s
  /// Rewards are the marginal sum-rate change of placing a device on a
  /// channel, counting the devices outside the block; pair terms are the
  /// exact excess loss of placing both. Exact for <= 2 block devices per channel.
  MarginalSumRate,
};

struct AssignmentQuboWeights {
  /// <= 0 selects the automatic value.
  double lambda_onehot = 0.0;
  /// < 0 selects the automatic value.
  double lambda_int = -1.0;
  InterferenceProxy proxy = InterferenceProxy::MarginalSumRate;
};

/// A Qubo plus the (device, channel) meaning of each variable.
struct AssignmentQubo {
  Qubo qubo;
  std::vector<AssignmentVar> vars;
  /// Linear reward of each variable, bit/s: the device's own rate against
  /// the fixed devices, or the marginal sum-rate for MarginalSumRate.
  Eigen::VectorXd reward;
  std::vector<int> active_devices;
  double lambda_onehot = 0.0;
  double lambda_int = 0.0;

  /// Variable indices belonging to the k-th active device, in candidate order.
  std::vector<int> vars_of(int active_pos) const;
};

/// The `count` highest-gain channels of a device, best first.
std::vector<int> top_channels(const NetworkInstance& instance, int device, int count);

/// The `count` channels with the largest marginal sum-rate for `device`
/// (the block's other devices removed), best first.
std::vector<int> top_marginal_channels(const NetworkInstance& instance, const PowerVector& powers,
                                       const Assignment& context, const std::vector<int>& block, int device,
                                       int count);

/// Encodes re-assignment of `active_devices` to their candidate channels with
/// the other devices held at their channels in `context`. Minimizes
///   -sum r_ik x_ik + lambda_int sum_k sum_{i<j} I_ijk x_ik x_jk
///   + lambda_onehot sum_i (sum_k x_ik - 1)^2.
AssignmentQubo build_assignment_qubo(const NetworkInstance& instance, const PowerVector& powers,
                                     const Assignment& context, const std::vector<int>& active_devices,
                                     const std::vector<std::vector<int>>& candidates,
                                     const AssignmentQuboWeights& weights = {});

/// Maps a bitstring back to channels, repairing non-one-hot devices by reward.
Assignment decode_assignment(std::span<const std::uint8_t> x, const AssignmentQubo& map,
                             const Assignment& prior);

}  // namespace qfl
