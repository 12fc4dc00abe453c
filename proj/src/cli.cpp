#include "qfl/cli.hpp"

#include "qfl/errors.hpp"
#include "qfl/exp_io.hpp"
#include "qfl/quantum_sim.hpp"
#include "qfl/qubo.hpp"
#include "qfl/rng.hpp"
#include "qfl/selftest.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <sstream>

namespace qfl {

namespace {

/// Sets this experiment's entry in summary.json, keeping the other's.
void update_summary(const ExperimentConfig& cfg, const std::string& key, const nlohmann::json& value) {
  const auto path = std::filesystem::path(cfg.output_dir) / "summary.json";
  nlohmann::json summary = nlohmann::json::object();
  if (std::filesystem::exists(path)) {
    const auto bytes = read_file(path);
    summary = nlohmann::json::parse(bytes.begin(), bytes.end(), nullptr, false);
    if (!summary.is_object()) summary = nlohmann::json::object();
  }
  summary[key] = value;
  write_output(cfg, "summary.json", summary.dump(2) + "\n");
}

int optimize(const std::string& config_path, std::ostream& out) {
  const ExperimentConfig cfg = load_experiment_config(config_path);
  const OptimizeOutcome res = run_optimize_experiment(cfg);
  write_output(cfg, "sumrate_trace.csv", sumrate_trace_csv(res.traces, cfg.record_wall_clock));
  update_summary(cfg, "optimize", res.summary);
  out << "qaoa_bcd mean final " << res.summary["qaoa_bcd"]["mean_final_sum_rate_bps"].get<double>() / 1e6
      << " Mbps, sca " << res.summary["sca"]["mean_final_sum_rate_bps"].get<double>() / 1e6 << " Mbps, gap "
      << res.summary["sum_rate_gap_percent"].get<double>() << "%\n";
  return kExitOk;
}

int federate(const std::string& config_path, std::ostream& out) {
  const ExperimentConfig cfg = load_experiment_config(config_path);
  const FederateOutcome res = run_federate_experiment(cfg);
  write_output(cfg, "fl_rounds.csv", fl_rounds_csv(res.runs));
  update_summary(cfg, "federate", res.summary);
  out << "qfl final accuracy " << res.summary["qfl"]["mean_final_accuracy"].get<double>() << " after "
      << res.summary["qfl"]["mean_total_time_s"].get<double>() << " s, fl "
      << res.summary["fl"]["mean_final_accuracy"].get<double>() << " after "
      << res.summary["fl"]["mean_total_time_s"].get<double>() << " s\n";
  return kExitOk;
}

int qaoa_bench(int max_qubits, int instances, std::uint64_t seed, const std::string& out_path, std::ostream& out) {
  require(max_qubits >= 1 && max_qubits <= kBruteForceMaxVars,
          "--max-qubits must be in 1.." + std::to_string(kBruteForceMaxVars));
  require(instances >= 1, "--instances must be >= 1");
  std::ostringstream table;
  table.precision(17);
  table << "instance,n,optimum,maximum,qaoa_value,within_5pct,exact\n";
  int within = 0;
  int exact = 0;
  for (int m = 0; m < instances; ++m) {
    const int n = 1 + m % max_qubits;
    const Qubo q = random_qubo(n, derive_seed(seed, "qaoa_bench", static_cast<std::uint64_t>(m)));
    const double lo = brute_force_min(q).value;
    const double hi = brute_force_max(q);
    QaoaConfig cfg;
    cfg.seed = derive_seed(seed, "qaoa_bench.solve", static_cast<std::uint64_t>(m));
    const double v = qaoa_solve(q, cfg).value;
    const bool w = v <= lo + 0.05 * (hi - lo);
    const bool e = v <= lo + 1e-9 * (1.0 + std::abs(lo));
    within += w;
    exact += e;
    table << m << ',' << n << ',' << lo << ',' << hi << ',' << v << ',' << w << ',' << e << '\n';
  }
  const bool pass = within * 10 >= instances * 9 && exact * 10 >= instances * 8;
  out << table.str();
  out << "within 5%: " << within << "/" << instances << ", exact: " << exact << "/" << instances << " -> "
      << (pass ? "PASS" : "FAIL") << "\n";
  if (!out_path.empty()) write_file(out_path, table.str());
  return pass ? kExitOk : kExitCheckFailed;
}

int selftest(std::ostream& out) {
  bool all = true;
  for (const auto& c : run_selftest()) {
    out << (c.passed ? "PASS " : "FAIL ") << c.name << " (" << c.detail << ")\n";
    all = all && c.passed;
  }
  return all ? kExitOk : kExitCheckFailed;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Joint channel assignment, power control and federated learning benchmarks", "qflbench"};
  app.require_subcommand(1);

  std::string config_path;
  auto* opt = app.add_subcommand("optimize", "QAOA+BCD vs SCA sum-rate traces");
  opt->add_option("--config", config_path, "experiment JSON")->required();
  auto* fed = app.add_subcommand("federate", "federated training driven by both solvers' rates");
  fed->add_option("--config", config_path, "experiment JSON")->required();

  int max_qubits = 10;
  int instances = 50;
  std::uint64_t bench_seed = 1;
  std::string bench_out;
  auto* bench = app.add_subcommand("qaoa-bench", "random QUBOs against the exhaustive optimum");
  bench->add_option("--max-qubits", max_qubits, "largest instance size")->required();
  bench->add_option("--instances", instances, "number of QUBOs")->required();
  bench->add_option("--seed", bench_seed, "instance seed");
  bench->add_option("--out", bench_out, "also write the table to this CSV");
  auto* self = app.add_subcommand("selftest", "runtime invariant checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "qflbench: " << e.what() << "\n";
    return kExitValidation;
  }

  try {
    if (opt->parsed()) return optimize(config_path, out);
    if (fed->parsed()) return federate(config_path, out);
    if (bench->parsed()) return qaoa_bench(max_qubits, instances, bench_seed, bench_out, out);
    if (self->parsed()) return selftest(out);
  } catch (const ValidationError& e) {
    err << "qflbench: invalid input: " << e.what() << "\n";
    return kExitValidation;
  } catch (const IoError& e) {
    err << "qflbench: i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const IdxError& e) {
    err << "qflbench: bad idx file: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitValidation;
}

}  // namespace qfl
