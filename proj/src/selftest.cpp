#include "qfl/selftest.hpp"

#include "qfl/exp_io.hpp"
#include "qfl/fl_core.hpp"
#include "qfl/quantum_sim.hpp"
#include "qfl/qubo.hpp"
#include "qfl/rng.hpp"
#include "qfl/solvers.hpp"
#include "qfl/wireless_net.hpp"

#include <cmath>
#include <exception>
#include <functional>
#include <numbers>
#include <sstream>

namespace qfl {

namespace {

struct Outcome {
  bool passed;
  std::string detail;
};

Outcome check(bool passed, double measured, double bound) {
  std::ostringstream s;
  s << "measured " << measured << ", bound " << bound;
  return {passed, s.str()};
}

Circuit random_circuit(int qubits, int params, CounterRng& rng) {
  Circuit c(qubits);
  const GateKind rotations[] = {GateKind::RX, GateKind::RY, GateKind::RZ};
  for (int slot = 0; slot < params; ++slot) {
    c.rotation(rotations[rng() % 3], static_cast<int>(rng() % static_cast<std::uint64_t>(qubits)), slot);
    const int a = static_cast<int>(rng() % static_cast<std::uint64_t>(qubits));
    const int b = (a + 1) % qubits;
    if (qubits > 1) c.cnot(a, b);
  }
  return c;
}

Outcome norm_drift() {
  CounterRng rng(derive_seed(7, "selftest.norm"));
  StateVector s = StateVector::uniform(6);
  for (int g = 0; g < 1000; ++g) {
    const int q = static_cast<int>(rng() % 6);
    const double angle = 2.0 * std::numbers::pi * rng.uniform();
    switch (rng() % 5) {
      case 0: apply_rx(s, q, angle); break;
      case 1: apply_ry(s, q, angle); break;
      case 2: apply_rz(s, q, angle); break;
      case 3: apply_h(s, q); break;
      default: apply_cnot(s, q, (q + 1) % 6); break;
    }
  }
  const double drift = std::abs(s.norm() - 1.0);
  return check(drift <= 1e-9, drift, 1e-9);
}

Outcome shift_rule() {
  CounterRng rng(derive_seed(7, "selftest.shift"));
  double worst = 0.0;
  for (int t = 0; t < 5; ++t) {
    const Circuit c = random_circuit(4, 8, rng);
    std::vector<double> theta(8);
    for (auto& v : theta) v = 2.0 * std::numbers::pi * rng.uniform();
    const ZObservable obs{{0, 2}};
    const StateVector input(4);
    const Eigen::VectorXd grad = parameter_shift_grad(c, theta, obs, input);
    for (int k = 0; k < 8; ++k) {
      auto plus = theta;
      auto minus = theta;
      plus[static_cast<std::size_t>(k)] += 1e-5;
      minus[static_cast<std::size_t>(k)] -= 1e-5;
      const double fd = (expect_z(apply(input, c, plus), obs) - expect_z(apply(input, c, minus), obs)) / 2e-5;
      worst = std::max(worst, std::abs(fd - grad[k]));
    }
  }
  return check(worst <= 1e-6, worst, 1e-6);
}

Outcome qaoa_vs_brute_force() {
  int exact = 0;
  for (int m = 0; m < 6; ++m) {
    const Qubo q = random_qubo(4 + m, derive_seed(7, "selftest.qaoa", static_cast<std::uint64_t>(m)));
    const QuboSolution best = brute_force_min(q);
    QaoaConfig cfg;
    cfg.restarts = 2;
    cfg.seed = static_cast<std::uint64_t>(m);
    const QaoaResult r = qaoa_solve(q, cfg);
    if (r.value < best.value - 1e-9) return {false, "qaoa reported energy below the exhaustive minimum"};
    if (r.value <= best.value + 1e-9) ++exact;
  }
  return check(exact >= 5, exact, 5);
}

Outcome anneal_vs_brute_force() {
  int exact = 0;
  for (int m = 0; m < 6; ++m) {
    const Qubo q = random_qubo(8 + m, derive_seed(7, "selftest.anneal", static_cast<std::uint64_t>(m)));
    AnnealConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(m);
    if (anneal_min(q, cfg).value <= brute_force_min(q).value + 1e-9) ++exact;
  }
  return check(exact == 6, exact, 6);
}

Outcome qubo_json_round_trip() {
  const Qubo q = random_qubo(7, 11);
  const Qubo back = qubo_from_json(to_json(q));
  const bool same = back.size() == q.size() && back.linear() == q.linear() && back.upper() == q.upper() &&
                    back.offset() == q.offset();
  return {same, same ? "identical" : "coefficients differ"};
}

Outcome sum_rate_identity() {
  NetworkConfig cfg{.num_devices = 12, .num_channels = 3, .seed = 5};
  const NetworkInstance inst = sample_network(cfg);
  const Assignment a = greedy_assignment(inst);
  const PowerVector p = uniform_power(inst, 17.0);
  const Eigen::VectorXd w = power_watts(p);
  double direct = 0.0;
  for (int i = 0; i < inst.num_devices(); ++i) {
    const int k = a.channel_of_device[static_cast<std::size_t>(i)];
    double interference = 0.0;
    for (int j = 0; j < inst.num_devices(); ++j)
      if (j != i && a.channel_of_device[static_cast<std::size_t>(j)] == k) interference += w[j] * inst.link_gain(j, k);
    direct += inst.bandwidth() * std::log2(1.0 + w[i] * inst.link_gain(i, k) / (cfg.noise_watts() + interference));
  }
  const double rel = std::abs(sum_rate(inst, a, p) - direct) / direct;
  return check(rel <= 1e-9, rel, 1e-9);
}

Outcome power_steps_monotone() {
  NetworkConfig cfg{.num_devices = 8, .num_channels = 2, .seed = 9};
  const NetworkInstance inst = sample_network(cfg);
  const Assignment a = greedy_assignment(inst);
  const PowerVector p = midpoint_power(inst);
  const double before = sum_rate(inst, a, p);
  const double sca = sum_rate(inst, a, power_step_sca(inst, a, p, 5));
  const double pga = sum_rate(inst, a, power_step_pga(inst, a, p, 5, 0.2));
  const double worst = std::min(sca, pga) - before;
  return {worst >= -1e-9 * before, "worst change " + std::to_string(worst) + " bit/s"};
}

Outcome bcd_traces_monotone() {
  NetworkConfig net{.num_devices = 6, .num_channels = 3, .seed = 3};
  const NetworkInstance inst = sample_network(net);
  BcdConfig cfg;
  cfg.outer_iterations = 6;
  cfg.block_size = 3;
  cfg.qaoa.restarts = 1;
  const bool ok = solve_qaoa_bcd(inst, cfg).trace.monotone() && solve_sca_baseline(inst, cfg).trace.monotone();
  return {ok, ok ? "both traces non-decreasing" : "a trace decreased"};
}

Outcome aggregate_identity() {
  std::vector<ModelParams> models;
  const std::vector<int> counts{3, 5, 11};
  for (int m = 0; m < 3; ++m)
    models.push_back(init_model(ModelKind::Linear, 4, 2, {}, static_cast<std::uint64_t>(m)));
  const ModelParams avg = aggregate(models, counts);
  Eigen::VectorXd expected = Eigen::VectorXd::Zero(avg.values.size());
  for (int m = 0; m < 3; ++m) expected += counts[static_cast<std::size_t>(m)] * models[static_cast<std::size_t>(m)].values;
  expected /= 19.0;
  const double err = (avg.values - expected).cwiseAbs().maxCoeff();
  return check(err <= 1e-12, err, 1e-12);
}

Outcome partition_cover() {
  BlobSpec spec{default_blob_centers(3, 4, 1), 0.05, 30, 4, 2};
  const LabeledDataset data = synth_blobs(spec);
  const auto rows = partition_noniid_rows(data, 6, 4);
  std::vector<int> seen(static_cast<std::size_t>(data.size()), 0);
  for (const auto& shard : rows) {
    for (int r : shard) {
      ++seen[static_cast<std::size_t>(r)];
      if (data.labels[static_cast<std::size_t>(r)] != data.labels[static_cast<std::size_t>(shard.front())])
        return {false, "a shard holds two labels"};
    }
  }
  for (int s : seen)
    if (s != 1) return {false, "rows are not covered exactly once"};
  return {true, "single-label disjoint cover"};
}

Outcome idx_round_trip() {
  const IdxFile f{kIdxImagesMagic, {2, 2, 2}, {0, 255, 7, 9, 1, 2, 3, 4}};
  const auto bytes = write_idx(f);
  if (write_idx(parse_idx(bytes)) != bytes) return {false, "round trip changed the bytes"};
  auto cut = bytes;
  cut.pop_back();
  try {
    parse_idx(cut);
  } catch (const IdxError& e) {
    if (e.kind() == IdxError::Kind::Truncated) return {true, "round trip and truncation detected"};
  }
  return {false, "truncated payload not reported"};
}

Outcome config_round_trip() {
  ExperimentConfig cfg;
  cfg.master_seed = 42;
  cfg.bcd.power_step = PowerStepKind::ScaBound;
  cfg.fl.fl_model = ModelKind::Linear;
  const auto j = to_json(cfg);
  const bool same = to_json(experiment_config_from_json(j)) == j;
  return {same, same ? "identical" : "fields differ"};
}

Outcome federation_symmetry() {
  BlobSpec spec{default_blob_centers(2, 16, 3), 0.1, 40, 16, 5};
  const LabeledDataset data = synth_blobs(spec);
  FederationConfig cfg;
  cfg.num_devices = 4;
  cfg.rounds = 2;
  cfg.fl_model = ModelKind::Vqc;
  const std::vector<double> rates{1e5, 2e5, 3e5, 4e5};
  const FederationResult r = run_federation(data, cfg, rates, rates);
  return {r.qfl == r.fl, r.qfl == r.fl ? "arms identical" : "arms differ under identical rates"};
}

}  // namespace

std::vector<SelftestCheck> run_selftest() {
  const std::pair<const char*, std::function<Outcome()>> checks[] = {
      {"statevector norm drift over 1000 gates", norm_drift},
      {"parameter shift matches finite differences", shift_rule},
      {"qaoa never beats the exhaustive minimum", qaoa_vs_brute_force},
      {"annealing finds small exhaustive minima", anneal_vs_brute_force},
      {"qubo json round trip", qubo_json_round_trip},
      {"sum-rate matches direct evaluation", sum_rate_identity},
      {"power steps do not lower the sum-rate", power_steps_monotone},
      {"bcd traces are monotone", bcd_traces_monotone},
      {"aggregate is the weighted mean", aggregate_identity},
      {"non-iid partition is a single-label cover", partition_cover},
      {"idx round trip and truncation", idx_round_trip},
      {"experiment config round trip", config_round_trip},
      {"federation arms agree under equal rates", federation_symmetry},
  };
  std::vector<SelftestCheck> out;
  for (const auto& [name, fn] : checks) {
    try {
      const Outcome o = fn();
      out.push_back({name, o.passed, o.detail});
    } catch (const std::exception& e) {
      out.push_back({name, false, std::string("threw: ") + e.what()});
    }
  }
  return out;
}

}  // namespace qfl
