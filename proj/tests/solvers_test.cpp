#include "oracles.hpp"

#include "qfl/errors.hpp"
#include "qfl/rng.hpp"
#include "qfl/solvers.hpp"

#include <doctest.h>

using namespace qfl;

namespace {

NetworkInstance network(int devices, int channels, std::uint64_t seed) {
  return sample_network(NetworkConfig{.num_devices = devices, .num_channels = channels, .seed = seed});
}

double true_rate(const NetworkInstance& inst, const Assignment& a, const PowerVector& p) {
  const Eigen::VectorXd w = power_watts(p);
  return oracle::sum_rate(inst, a.channel_of_device, {w.data(), w.data() + w.size()});
}

Assignment all_on(int devices, int channel) { return {std::vector<int>(static_cast<std::size_t>(devices), channel)}; }

BcdConfig small_bcd(int iterations) {
  BcdConfig cfg;
  cfg.outer_iterations = iterations;
  cfg.qaoa.restarts = 1;
  return cfg;
}

}  // namespace

TEST_CASE("power steps drive a lone device to full power") {
  const NetworkInstance inst = network(1, 2, 3);
  const Assignment a{{0}};
  const PowerVector start = uniform_power(inst, 6.0);
  CHECK(power_step_pga(inst, a, start, 60, 0.2).power_dbm[0] == doctest::Approx(24.0).epsilon(0.1 / 24.0));
  CHECK(power_step_sca(inst, a, start, 20).power_dbm[0] == doctest::Approx(24.0).epsilon(0.1 / 24.0));
}

TEST_CASE("zero power steps return the input") {
  const NetworkInstance inst = network(5, 2, 4);
  const Assignment a = greedy_assignment(inst);
  const PowerVector p = uniform_power(inst, 9.5);
  CHECK(power_step_pga(inst, a, p, 0, 0.2).power_dbm == p.power_dbm);
  CHECK(power_step_sca(inst, a, p, 0).power_dbm == p.power_dbm);
}

TEST_CASE("pga does not lower a shared channel's sum-rate") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const NetworkInstance inst = network(2, 1, seed);
    const Assignment a = all_on(2, 0);
    const PowerVector p = midpoint_power(inst);
    CHECK(true_rate(inst, a, power_step_pga(inst, a, p, 5, 0.2)) >= true_rate(inst, a, p));
  }
}

TEST_CASE("each sca iteration is monotone on random six-device instances") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const NetworkInstance inst = network(6, 2, 20 + seed);
    const Assignment a = greedy_assignment(inst);
    PowerVector p = midpoint_power(inst);
    for (int it = 0; it < 15; ++it) {
      const double before = true_rate(inst, a, p);
      p = power_step_sca(inst, a, p, 1);
      CHECK(true_rate(inst, a, p) >= before * (1.0 - 1e-9));
    }
  }
}

TEST_CASE("sca is stationary at a converged point") {
  const NetworkInstance inst = network(3, 1, 8);
  const Assignment a = all_on(3, 0);
  const PowerVector fixed = power_step_sca(inst, a, midpoint_power(inst), 500);
  const double before = true_rate(inst, a, fixed);
  const double after = true_rate(inst, a, power_step_sca(inst, a, fixed, 1));
  CHECK(std::abs(after - before) < 1e-6 * before);
}

TEST_CASE("single-device block picks the better candidate") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const NetworkInstance inst = network(8, 4, 40 + seed);
    const PowerVector p = midpoint_power(inst);
    const Assignment incumbent = greedy_assignment(inst);
    const int device = static_cast<int>(seed % 8);
    BcdConfig cfg = small_bcd(1);
    cfg.candidates_per_device = 2;
    const auto cands = top_marginal_channels(inst, p, incumbent, {device}, device, 2);
    double best = true_rate(inst, incumbent, p);
    for (int k : cands) {
      Assignment trial = incumbent;
      trial.channel_of_device[static_cast<std::size_t>(device)] = k;
      best = std::max(best, true_rate(inst, trial, p));
    }
    const Assignment got = assignment_step(inst, p, incumbent, {device}, cfg);
    CHECK(true_rate(inst, got, p) == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("brute-force backend matches exhaustive search over a 2x2 block") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const NetworkInstance inst = network(2, 2, 60 + seed);
    const PowerVector p = midpoint_power(inst);
    const Assignment incumbent = greedy_assignment(inst);
    BcdConfig cfg = small_bcd(1);
    cfg.assignment_backend = AssignmentBackend::BruteForce;
    cfg.candidates_per_device = 2;
    double best = 0.0;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) best = std::max(best, true_rate(inst, Assignment{{a, b}}, p));
    const Assignment got = assignment_step(inst, p, incumbent, {0, 1}, cfg);
    CHECK(true_rate(inst, got, p) == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("a worsening proposal leaves the incumbent in place") {
  int retained = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const NetworkInstance inst = network(6, 3, 80 + seed);
    const PowerVector p = midpoint_power(inst);
    const Assignment incumbent = greedy_assignment(inst);
    const std::vector<int> block{0, 1, 2, 3};
    BcdConfig cfg = small_bcd(1);
    cfg.assignment_backend = AssignmentBackend::BruteForce;
    cfg.candidate_rule = CandidateRule::Gain;
    cfg.qubo_weights = {.lambda_onehot = 1e-30, .lambda_int = 0.0, .proxy = InterferenceProxy::ReceivedPower};
    std::vector<std::vector<int>> cands;
    for (int d : block) cands.push_back(top_channels(inst, d, cfg.candidates_per_device));
    const auto aq = build_assignment_qubo(inst, p, incumbent, block, cands, cfg.qubo_weights);
    const Assignment proposal = decode_assignment(brute_force_min(aq.qubo).x, aq, incumbent);
    const Assignment got = assignment_step(inst, p, incumbent, block, cfg);
    if (true_rate(inst, proposal, p) < true_rate(inst, incumbent, p)) {
      CHECK(got == incumbent);
      ++retained;
    } else {
      CHECK(got == proposal);
    }
  }
  CHECK(retained > 0);
}

TEST_CASE("bcd traces are monotone and deterministic") {
  const NetworkInstance inst = network(10, 3, 5);
  const BcdConfig cfg = small_bcd(12);
  const SolverResult q = solve_qaoa_bcd(inst, cfg);
  const SolverResult s = solve_sca_baseline(inst, cfg);
  CHECK(q.trace.solver_name == "qaoa_bcd");
  CHECK(s.trace.solver_name == "sca");
  for (const auto* r : {&q, &s}) {
    REQUIRE(r->trace.points.size() == 13);
    CHECK(r->trace.monotone());
    CHECK(r->trace.points[0].sum_rate_bps == doctest::Approx(true_rate(inst, greedy_assignment(inst), midpoint_power(inst))));
    CHECK(r->trace.final_sum_rate() == doctest::Approx(true_rate(inst, r->assignment, r->powers)).epsilon(1e-12));
  }
  const SolverResult q2 = solve_qaoa_bcd(inst, cfg);
  const SolverResult s2 = solve_sca_baseline(inst, cfg);
  for (std::size_t i = 0; i < q.trace.points.size(); ++i) {
    CHECK(q.trace.points[i].sum_rate_bps == q2.trace.points[i].sum_rate_bps);
    CHECK(s.trace.points[i].sum_rate_bps == s2.trace.points[i].sum_rate_bps);
    CHECK(q.trace.points[i].assignment_hash == q2.trace.points[i].assignment_hash);
  }
}

TEST_CASE("iterations_to reads the first crossing") {
  SolverTrace t{"x", {{0, 1.0, 0, 0}, {1, 5.0, 0, 0}, {2, 9.6, 0, 0}, {3, 10.0, 0, 0}}};
  CHECK(t.iterations_to(0.95) == 2);
  CHECK(t.iterations_to(0.0) == 0);
  CHECK(t.monotone());
  t.points[3].sum_rate_bps = 9.0;
  CHECK_FALSE(t.monotone());
}

TEST_CASE("qaoa bcd reaches the tiny-instance optimum") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const NetworkInstance inst = network(4, 3, derive_seed(9, "test.tiny", seed));
    BcdConfig cfg;
    const double best = oracle::minlp_optimum(inst);
    const double got = solve_qaoa_bcd(inst, cfg).trace.final_sum_rate();
    CHECK(got >= 0.98 * best);
  }
}

TEST_CASE("bcd config validation") {
  BcdConfig cfg;
  cfg.block_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = BcdConfig{};
  cfg.candidates_per_device = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = BcdConfig{};
  cfg.block_size = 11;
  CHECK_THROWS_AS(assignment_step(network(12, 3, 0), midpoint_power(network(12, 3, 0)),
                                  greedy_assignment(network(12, 3, 0)), {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, cfg),
                  ValidationError);
}
