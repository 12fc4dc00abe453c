#include "qfl/solvers.hpp"

#include "qfl/errors.hpp"
#include "qfl/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace qfl {

void BcdConfig::validate() const {
  require(outer_iterations >= 1, "bcd.outer_iterations must be >= 1");
  require(block_size >= 1, "bcd.block_size must be >= 1");
  require(candidates_per_device >= 1, "bcd.candidates_per_device must be >= 1");
  require(power_inner_iters >= 0, "bcd.power_inner_iters must be >= 0");
  require(pga_step_size > 0.0, "bcd.pga_step_size must be positive");
  require(relax_steps >= 0, "bcd.relax_steps must be >= 0");
  if (assignment_backend == AssignmentBackend::Qaoa) {
    require(block_size * candidates_per_device <= kMaxQubits,
            "bcd: block_size x candidates_per_device must be <= " + std::to_string(kMaxQubits) +
                " qubits for the qaoa backend");
    qaoa.validate();
  }
  if (assignment_backend == AssignmentBackend::BruteForce)
    require(block_size * candidates_per_device <= kBruteForceMaxVars,
            "bcd: block too large for the brute-force backend");
}

bool SolverTrace::monotone() const {
  for (std::size_t i = 1; i < points.size(); ++i)
    if (points[i].sum_rate_bps < points[i - 1].sum_rate_bps) return false;
  return true;
}

int SolverTrace::iterations_to(double fraction) const {
  const double target = fraction * final_sum_rate();
  for (const auto& p : points)
    if (p.sum_rate_bps >= target) return p.iteration;
  return points.empty() ? 0 : points.back().iteration;
}

std::uint64_t assignment_hash(const Assignment& a) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (int c : a.channel_of_device) {
    h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(c));
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

struct PowerBox {
  double lo_w;
  double hi_w;
};

PowerBox power_box(const NetworkInstance& instance) {
  const auto& r = instance.config.power_range_dbm;
  return {dbm_to_watt(r.lo), dbm_to_watt(r.hi)};
}

PowerVector to_dbm(const Eigen::VectorXd& watts) {
  return PowerVector{watts.unaryExpr([](double w) { return watt_to_dbm(w); })};
}

}  // namespace

PowerVector power_step_pga(const NetworkInstance& instance, const Assignment& assignment, const PowerVector& powers,
                           int steps, double step_size) {
  validate(instance, assignment);
  validate(instance, powers);
  require(steps >= 0, "power_step_pga: steps must be >= 0");
  if (steps == 0) return powers;

  const auto& ch = assignment.channel_of_device;
  const auto box = power_box(instance);
  const double log_lo = std::log(box.lo_w);
  const double log_hi = std::log(box.hi_w);
  const int n = instance.num_devices();

  Eigen::VectorXd w = power_watts(powers);
  double f = sum_rate_watts(instance, ch, w);
  Eigen::VectorXd best_w = w;
  double best_f = f;
  double eta = step_size;

  for (int s = 0; s < steps; ++s) {
    // d f / d ln p_i = p_i d f / d p_i, by central differences in watts.
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
      if (w[i] <= 0.0) continue;  // 0 W sentinel stays off
      const double h = std::max(0.01 * w[i], 1e-9);
      Eigen::VectorXd probe = w;
      probe[i] = w[i] + h;
      const double up = sum_rate_watts(instance, ch, probe);
      probe[i] = std::max(w[i] - h, 0.0);
      const double down = sum_rate_watts(instance, ch, probe);
      grad[i] = w[i] * (up - down) / (w[i] + h - probe[i]);
      const double x = std::log(w[i]);
      if ((x >= log_hi && grad[i] > 0.0) || (x <= log_lo && grad[i] < 0.0)) grad[i] = 0.0;
    }
    const double gmax = grad.cwiseAbs().maxCoeff();
    if (!(gmax > 0.0)) break;

    Eigen::VectorXd trial = w;
    for (int i = 0; i < n; ++i) {
      if (w[i] <= 0.0) continue;
      const double x = std::clamp(std::log(w[i]) + eta * grad[i] / gmax, log_lo, log_hi);
      trial[i] = std::exp(x);
    }
    const double ft = sum_rate_watts(instance, ch, trial);
    if (ft > f) {
      w = trial;
      f = ft;
      if (f > best_f) {
        best_f = f;
        best_w = w;
      }
    } else {
      eta *= 0.5;
    }
  }
  return to_dbm(best_w);
}

PowerVector power_step_sca(const NetworkInstance& instance, const Assignment& assignment, const PowerVector& powers,
                           int inner_iters) {
  validate(instance, assignment);
  validate(instance, powers);
  require(inner_iters >= 0, "power_step_sca: inner_iters must be >= 0");
  const auto& ch = assignment.channel_of_device;
  const int n = instance.num_devices();
  const double noise = instance.config.noise_watts();
  const auto box = power_box(instance);
  const double q_lo = std::log2(box.lo_w);
  const double q_hi = std::log2(box.hi_w);

  Eigen::VectorXd w = power_watts(powers);
  for (int i = 0; i < n; ++i)
    require(w[i] > 0.0, "power_step_sca: device " + std::to_string(i) +
                            " has zero SINR; move powers into the range before calling");

  std::vector<std::vector<int>> members(static_cast<std::size_t>(instance.num_channels()));
  for (int i = 0; i < n; ++i) members[static_cast<std::size_t>(ch[static_cast<std::size_t>(i)])].push_back(i);
  Eigen::VectorXd gain(n);
  for (int i = 0; i < n; ++i) gain[i] = instance.link_gain(i, ch[static_cast<std::size_t>(i)]);

  auto interference = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd out(n);
    for (const auto& group : members) {
      for (int i : group) {
        double acc = noise;
        for (int j : group)
          if (j != i) acc += p[j] * gain[j];
        out[i] = acc;
      }
    }
    return out;
  };

  double f = sum_rate_watts(instance, ch, w);
  for (int it = 0; it < inner_iters; ++it) {
    // Expansion point.
    const Eigen::VectorXd interf0 = interference(w);
    Eigen::VectorXd alpha(n);
    Eigen::VectorXd beta(n);
    for (int i = 0; i < n; ++i) {
      const double g = w[i] * gain[i] / interf0[i];
      alpha[i] = g / (1.0 + g);
      beta[i] = std::log2(1.0 + g) - alpha[i] * std::log2(g);
    }
    // Lower bound sum_i alpha_i log2(sinr_i(q)) + beta_i, concave in q = log2 p.
    auto bound = [&](const Eigen::VectorXd& q) {
      const Eigen::VectorXd p = q.unaryExpr([](double v) { return std::exp2(v); });
      const Eigen::VectorXd interf = interference(p);
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += alpha[i] * (q[i] + std::log2(gain[i]) - std::log2(interf[i])) + beta[i];
      return acc;
    };
    auto bound_grad = [&](const Eigen::VectorXd& q) {
      const Eigen::VectorXd p = q.unaryExpr([](double v) { return std::exp2(v); });
      const Eigen::VectorXd interf = interference(p);
      Eigen::VectorXd g = alpha;
      for (const auto& group : members)
        for (int m : group)
          for (int i : group)
            if (i != m) g[m] -= alpha[i] * p[m] * gain[m] / interf[i];
      return g;
    };

    Eigen::VectorXd q = w.unaryExpr([](double v) { return std::log2(v); });
    double lb = bound(q);
    double step = 1.0;
    for (int inner = 0; inner < 50 && step > 1e-8; ++inner) {
      Eigen::VectorXd g = bound_grad(q);
      for (int i = 0; i < n; ++i)
        if ((q[i] >= q_hi && g[i] > 0.0) || (q[i] <= q_lo && g[i] < 0.0)) g[i] = 0.0;
      if (g.cwiseAbs().maxCoeff() < 1e-12) break;
      // Armijo backtracking on the projected step.
      bool moved = false;
      while (step > 1e-8) {
        const Eigen::VectorXd cand = (q + step * g).cwiseMax(q_lo).cwiseMin(q_hi);
        const double lc = bound(cand);
        if (lc >= lb + 1e-4 * g.dot(cand - q)) {
          moved = lc > lb;
          q = cand;
          lb = lc;
          step *= 2.0;
          break;
        }
        step *= 0.5;
      }
      if (!moved) break;
    }

    const Eigen::VectorXd next = q.unaryExpr([](double v) { return std::exp2(v); });
    const double fn = sum_rate_watts(instance, ch, next);
    // The bound is tight at the expansion point, so fn >= f up to rounding.
    if (!(fn >= f)) break;
    const bool stalled = fn - f <= 1e-12 * std::max(1.0, f);
    w = next;
    f = fn;
    if (stalled) break;
  }
  return to_dbm(w);
}

BitString relaxed_round(const AssignmentQubo& aq, int steps) {
  const Qubo& q = aq.qubo;
  const int n = q.size();
  Eigen::VectorXd y(n);
  for (std::size_t a = 0; a < aq.active_devices.size(); ++a) {
    const auto idx = aq.vars_of(static_cast<int>(a));
    for (int v : idx) y[v] = 1.0 / static_cast<double>(idx.size());
  }
  const Eigen::MatrixXd sym = q.upper() + q.upper().transpose();
  // 1/L with L bounded by the max absolute row sum of the Hessian.
  double lipschitz = n > 0 ? sym.cwiseAbs().rowwise().sum().maxCoeff() : 0.0;
  if (!(lipschitz > 0.0)) lipschitz = n > 0 ? std::max(q.linear().cwiseAbs().maxCoeff(), 1e-300) : 1.0;
  const double eta = 1.0 / lipschitz;
  for (int s = 0; s < steps; ++s) {
    const Eigen::VectorXd grad = q.linear() + sym * y;
    y = (y - eta * grad).cwiseMax(0.0).cwiseMin(1.0);
  }
  BitString x(static_cast<std::size_t>(n), 0);
  for (std::size_t a = 0; a < aq.active_devices.size(); ++a) {
    const auto idx = aq.vars_of(static_cast<int>(a));
    int chosen = idx.front();
    for (int v : idx)
      if (y[v] > y[chosen]) chosen = v;
    x[static_cast<std::size_t>(chosen)] = 1;
  }
  return x;
}

namespace {

std::vector<std::vector<int>> block_candidates(const NetworkInstance& instance, const PowerVector& powers,
                                               const Assignment& incumbent, const std::vector<int>& block,
                                               const BcdConfig& cfg) {
  std::vector<std::vector<int>> out;
  out.reserve(block.size());
  const auto count = static_cast<std::size_t>(cfg.candidates_per_device);
  for (int d : block) {
    if (cfg.candidate_rule == CandidateRule::Gain) {
      out.push_back(top_channels(instance, d, cfg.candidates_per_device));
      continue;
    }
    // Interleave the ranking against an empty block with the ranking against
    // the incumbent, so a move the incumbent makes attractive is always offered.
    const auto empty = top_marginal_channels(instance, powers, incumbent, block, d, cfg.candidates_per_device);
    const auto held = top_marginal_channels(instance, powers, incumbent, {d}, d, cfg.candidates_per_device);
    std::vector<int> merged;
    for (std::size_t r = 0; r < count && merged.size() < count; ++r) {
      for (int k : {empty[r], held[r]})
        if (merged.size() < count && std::find(merged.begin(), merged.end(), k) == merged.end()) merged.push_back(k);
    }
    out.push_back(std::move(merged));
  }
  return out;
}

Assignment safeguard(const NetworkInstance& instance, const PowerVector& powers, const Assignment& incumbent,
                     Assignment proposal) {
  return sum_rate(instance, proposal, powers) >= sum_rate(instance, incumbent, powers) ? proposal : incumbent;
}

Assignment relaxed_assignment_step(const NetworkInstance& instance, const PowerVector& powers,
                                   const Assignment& incumbent, const std::vector<int>& block, const BcdConfig& cfg) {
  const auto aq = build_assignment_qubo(instance, powers, incumbent, block,
                                        block_candidates(instance, powers, incumbent, block, cfg), cfg.qubo_weights);
  const BitString x = relaxed_round(aq, cfg.relax_steps);
  return safeguard(instance, powers, incumbent, decode_assignment(x, aq, incumbent));
}

using AssignmentFn = Assignment (*)(const NetworkInstance&, const PowerVector&, const Assignment&,
                                    const std::vector<int>&, const BcdConfig&);
using PowerFn = PowerVector (*)(const NetworkInstance&, const Assignment&, const PowerVector&, const BcdConfig&);

PowerVector configured_power_step(const NetworkInstance& instance, const Assignment& a, const PowerVector& p,
                                  const BcdConfig& cfg) {
  if (cfg.power_step == PowerStepKind::ScaBound) return power_step_sca(instance, a, p, cfg.power_inner_iters);
  return power_step_pga(instance, a, p, cfg.power_inner_iters, cfg.pga_step_size);
}

PowerVector sca_power_step(const NetworkInstance& instance, const Assignment& a, const PowerVector& p,
                           const BcdConfig& cfg) {
  return power_step_sca(instance, a, p, cfg.power_inner_iters);
}

/// Shared BCD skeleton: greedy channels, midpoint powers, seeded round-robin blocks.
SolverResult run_bcd(const NetworkInstance& instance, const BcdConfig& cfg, const std::string& name,
                     AssignmentFn assign, PowerFn power) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  };

  const int n = instance.num_devices();
  SolverResult res{greedy_assignment(instance), midpoint_power(instance), {name, {}}};
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  CounterRng perm_rng(derive_seed(cfg.seed, "bcd.permutation"));
  std::shuffle(perm.begin(), perm.end(), perm_rng);

  double best = sum_rate(instance, res.assignment, res.powers);
  res.trace.points.push_back({0, best, assignment_hash(res.assignment), elapsed_ms()});
  const int block_size = std::min(cfg.block_size, n);
  std::size_t cursor = 0;
  for (int it = 1; it <= cfg.outer_iterations; ++it) {
    std::vector<int> block;
    for (int b = 0; b < block_size; ++b) block.push_back(perm[(cursor + static_cast<std::size_t>(b)) % perm.size()]);
    cursor = (cursor + static_cast<std::size_t>(block_size)) % perm.size();

    BcdConfig step_cfg = cfg;
    step_cfg.qaoa.seed = derive_seed(cfg.seed, "bcd.qaoa", static_cast<std::uint64_t>(it));
    step_cfg.anneal.seed = derive_seed(cfg.seed, "bcd.anneal", static_cast<std::uint64_t>(it));
    res.assignment = assign(instance, res.powers, res.assignment, block, step_cfg);
    res.powers = power(instance, res.assignment, res.powers, step_cfg);
    best = std::max(best, sum_rate(instance, res.assignment, res.powers));
    res.trace.points.push_back({it, best, assignment_hash(res.assignment), elapsed_ms()});
  }
  return res;
}

}  // namespace

Assignment assignment_step(const NetworkInstance& instance, const PowerVector& powers, const Assignment& incumbent,
                           const std::vector<int>& block, const BcdConfig& cfg) {
  const auto aq = build_assignment_qubo(instance, powers, incumbent, block,
                                        block_candidates(instance, powers, incumbent, block, cfg), cfg.qubo_weights);
  BitString x;
  switch (cfg.assignment_backend) {
    case AssignmentBackend::Qaoa:
      require(aq.qubo.size() <= kMaxQubits, "assignment_step: block needs " + std::to_string(aq.qubo.size()) +
                                                " qubits, above the " + std::to_string(kMaxQubits) + "-qubit cap");
      x = qaoa_solve(aq.qubo, cfg.qaoa).x;
      break;
    case AssignmentBackend::Anneal:
      x = anneal_min(aq.qubo, cfg.anneal).x;
      break;
    case AssignmentBackend::BruteForce:
      x = brute_force_min(aq.qubo).x;
      break;
  }
  return safeguard(instance, powers, incumbent, decode_assignment(x, aq, incumbent));
}

SolverResult solve_qaoa_bcd(const NetworkInstance& instance, const BcdConfig& cfg) {
  return run_bcd(instance, cfg, "qaoa_bcd", &assignment_step, &configured_power_step);
}

SolverResult solve_sca_baseline(const NetworkInstance& instance, const BcdConfig& cfg) {
  // The relaxation has no qubit budget, so the backend's size check does not apply.
  BcdConfig base = cfg;
  base.assignment_backend = AssignmentBackend::Anneal;
  return run_bcd(instance, base, "sca", &relaxed_assignment_step, &sca_power_step);
}

}  // namespace qfl
