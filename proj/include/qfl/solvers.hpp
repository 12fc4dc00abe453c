#pragma once

#include "qfl/quantum_sim.hpp"
#include "qfl/qubo.hpp"
#include "qfl/wireless_net.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace qfl {

enum class PowerStepKind { ProjectedGradient, ScaBound };
enum class AssignmentBackend { Qaoa, Anneal, BruteForce };
/// How each block device's candidate channels are shortlisted.
enum class CandidateRule { Gain, MarginalSumRate };

struct BcdConfig {
  int outer_iterations = 150;
  int block_size = 6;
  int candidates_per_device = 2;
  CandidateRule candidate_rule = CandidateRule::MarginalSumRate;
  PowerStepKind power_step = PowerStepKind::ProjectedGradient;
  int power_inner_iters = 5;
  /// Initial projected-gradient step in natural-log power units.
  double pga_step_size = 0.2;
  /// Projected-gradient steps of the relaxed assignment heuristic (SCA baseline).
  int relax_steps = 20;
  QaoaConfig qaoa{.depth_p = 3, .shots = 256, .restarts = 2};
  AnnealConfig anneal{.sweeps = 200, .restarts = 4};
  AssignmentBackend assignment_backend = AssignmentBackend::Qaoa;
  AssignmentQuboWeights qubo_weights{};
  std::uint64_t seed = 0;

  void validate() const;
};

struct TracePoint {
  int iteration;
  double sum_rate_bps;
  std::uint64_t assignment_hash;
  double wall_ms;
};

/// Best-so-far sum-rate per outer iteration; point 0 is the initialization.
struct SolverTrace {
  std::string solver_name;
  std::vector<TracePoint> points;

  double final_sum_rate() const { return points.empty() ? 0.0 : points.back().sum_rate_bps; }
  bool monotone() const;
  /// First iteration whose value reaches `fraction` of the final value.
  int iterations_to(double fraction) const;
};

struct SolverResult {
  Assignment assignment;
  PowerVector powers;
  SolverTrace trace;
};

std::uint64_t assignment_hash(const Assignment& a);

/// Projected gradient ascent on the sum-rate over log-power with finite
/// difference gradients; returns the best iterate visited.
PowerVector power_step_pga(const NetworkInstance& instance, const Assignment& assignment,
                           const PowerVector& powers, int steps, double step_size);

/// Successive convex approximation: maximizes the tight lower bound
/// alpha log2(sinr) + beta of every rate term, concave in q = log2(p).
PowerVector power_step_sca(const NetworkInstance& instance, const Assignment& assignment,
                           const PowerVector& powers, int inner_iters);

/// The relax-ascend-round assignment heuristic on an assignment Qubo.
BitString relaxed_round(const AssignmentQubo& aq, int steps);

/// Re-assigns `block`; accepted only if the true sum-rate does not decrease.
Assignment assignment_step(const NetworkInstance& instance, const PowerVector& powers,
                           const Assignment& incumbent, const std::vector<int>& block, const BcdConfig& cfg);

SolverResult solve_qaoa_bcd(const NetworkInstance& instance, const BcdConfig& cfg);
SolverResult solve_sca_baseline(const NetworkInstance& instance, const BcdConfig& cfg);

}  // namespace qfl
