#include "qfl/quantum_sim.hpp"

#include "qfl/rng.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace qfl {

bool is_rotation(GateKind kind) {
  return kind == GateKind::RX || kind == GateKind::RY || kind == GateKind::RZ;
}

int Circuit::num_params() const {
  int n = 0;
  for (const auto& g : gates_) n = std::max(n, g.slot + 1);
  return n;
}

Circuit& Circuit::add(const Gate& g) {
  gates_.push_back(g);
  return *this;
}

Circuit& Circuit::rotation(GateKind kind, int q, int slot) {
  require(is_rotation(kind), "rotation() needs RX, RY or RZ");
  require(slot >= 0, "parameter slot must be >= 0");
  return add({kind, q, -1, slot, 0.0});
}

Circuit& Circuit::fixed_rotation(GateKind kind, int q, double angle) {
  require(is_rotation(kind), "fixed_rotation() needs RX, RY or RZ");
  return add({kind, q, -1, -1, angle});
}

Circuit& Circuit::h(int q) { return add({GateKind::H, q}); }
Circuit& Circuit::cz(int a, int b) { return add({GateKind::CZ, a, b}); }
Circuit& Circuit::cnot(int control, int target) { return add({GateKind::CNOT, control, target}); }

void Circuit::validate() const {
  require(n_qubits_ >= 0 && n_qubits_ <= kMaxQubits, "circuit qubit count out of range");
  const int slots = num_params();
  std::vector<char> used(static_cast<std::size_t>(slots), 0);
  for (const auto& g : gates_) {
    require(g.q0 >= 0 && g.q0 < n_qubits_, "gate qubit index " + std::to_string(g.q0) + " out of range");
    if (g.kind == GateKind::CZ || g.kind == GateKind::CNOT) {
      require(g.q1 >= 0 && g.q1 < n_qubits_, "gate qubit index " + std::to_string(g.q1) + " out of range");
      require(g.q0 != g.q1, "two-qubit gate on a single qubit");
    }
    if (g.slot >= 0) used[static_cast<std::size_t>(g.slot)] = 1;
  }
  for (int s = 0; s < slots; ++s)
    require(used[static_cast<std::size_t>(s)], "parameter slots must be contiguous from 0; slot " +
                                                    std::to_string(s) + " is unused");
}

void apply_gate(StateVector& state, const Gate& g, std::span<const double> params) {
  const double theta = g.slot >= 0 ? params[static_cast<std::size_t>(g.slot)] : g.angle;
  switch (g.kind) {
    case GateKind::RX: apply_rx(state, g.q0, theta); break;
    case GateKind::RY: apply_ry(state, g.q0, theta); break;
    case GateKind::RZ: apply_rz(state, g.q0, theta); break;
    case GateKind::H:
      require(g.slot < 0, "H gate cannot take a parameter");
      apply_h(state, g.q0);
      break;
    case GateKind::CZ:
      require(g.slot < 0, "CZ gate cannot take a parameter");
      apply_cz(state, g.q0, g.q1);
      break;
    case GateKind::CNOT:
      require(g.slot < 0, "CNOT gate cannot take a parameter");
      apply_cnot(state, g.q0, g.q1);
      break;
  }
}

namespace {

void check_arity(const Circuit& circuit, std::span<const double> params, const StateVector& state) {
  circuit.validate();
  require(static_cast<int>(params.size()) == circuit.num_params(),
          "circuit expects " + std::to_string(circuit.num_params()) + " parameters, got " +
              std::to_string(params.size()));
  require(state.num_qubits() == circuit.num_qubits(), "state and circuit qubit counts differ");
}

}  // namespace

StateVector apply(StateVector state, const Circuit& circuit, std::span<const double> params) {
  check_arity(circuit, params, state);
  for (const auto& g : circuit.gates()) apply_gate(state, g, params);
  return state;
}

double expect_z(const StateVector& state, const ZObservable& obs) {
  Eigen::Index mask = 0;
  for (int q : obs.qubits) {
    require(q >= 0 && q < state.num_qubits(), "observable qubit out of range");
    mask ^= Eigen::Index{1} << q;
  }
  const auto& a = state.amplitudes();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double p = std::norm(a[i]);
    acc += (__builtin_popcountll(static_cast<unsigned long long>(i & mask)) & 1) ? -p : p;
  }
  return acc;
}

Eigen::VectorXd energy_diagonal(const Qubo& q) {
  const int n = q.size();
  require(n <= kMaxQubits, "energy_diagonal: more than " + std::to_string(kMaxQubits) + " variables");
  const Eigen::Index dim = Eigen::Index{1} << n;
  Eigen::VectorXd diag(dim);
  diag[0] = q.offset();
  for (Eigen::Index b = 1; b < dim; ++b) {
    const int top = 63 - __builtin_clzll(static_cast<unsigned long long>(b));
    const Eigen::Index rest = b ^ (Eigen::Index{1} << top);
    double e = diag[rest] + q.linear(top);
    for (int j = 0; j < top; ++j)
      if ((rest >> j) & 1) e += q.upper()(j, top);
    diag[b] = e;
  }
  return diag;
}

double expect_qubo(const StateVector& state, const Qubo& q) {
  require(q.size() == state.num_qubits(), "expect_qubo: qubo has " + std::to_string(q.size()) +
                                              " variables but state has " + std::to_string(state.num_qubits()) +
                                              " qubits");
  return state.probabilities().dot(energy_diagonal(q));
}

Eigen::MatrixXd parameter_shift_jacobian(const Circuit& circuit, std::span<const double> params,
                                         const std::vector<ZObservable>& observables, const StateVector& input) {
  check_arity(circuit, params, input);
  const int slots = circuit.num_params();
  std::vector<int> gate_of_slot(static_cast<std::size_t>(slots), -1);
  const auto& gates = circuit.gates();
  for (int gi = 0; gi < static_cast<int>(gates.size()); ++gi) {
    const auto& g = gates[static_cast<std::size_t>(gi)];
    if (g.slot < 0) continue;
    require(is_rotation(g.kind), "parameter_shift_grad: slot " + std::to_string(g.slot) +
                                     " drives a non-rotation gate; the shift rule does not apply");
    require(gate_of_slot[static_cast<std::size_t>(g.slot)] < 0,
            "parameter_shift_grad: slot " + std::to_string(g.slot) + " is shared by several gates");
    gate_of_slot[static_cast<std::size_t>(g.slot)] = gi;
  }

  Eigen::MatrixXd jac(static_cast<Eigen::Index>(observables.size()), slots);
  auto run_suffix = [&](StateVector s, std::size_t from) {
    for (std::size_t k = from; k < gates.size(); ++k) apply_gate(s, gates[k], params);
    Eigen::VectorXd vals(static_cast<Eigen::Index>(observables.size()));
    for (std::size_t o = 0; o < observables.size(); ++o) vals[static_cast<Eigen::Index>(o)] = expect_z(s, observables[o]);
    return vals;
  };

  // Walk the circuit once; each parameterized gate branches from the shared prefix.
  StateVector prefix = input;
  for (std::size_t gi = 0; gi < gates.size(); ++gi) {
    const Gate& g = gates[gi];
    if (g.slot >= 0) {
      const double theta = params[static_cast<std::size_t>(g.slot)];
      Gate shifted = g;
      shifted.slot = -1;
      shifted.angle = theta + std::numbers::pi / 2;
      StateVector plus = prefix;
      apply_gate(plus, shifted, params);
      shifted.angle = theta - std::numbers::pi / 2;
      StateVector minus = prefix;
      apply_gate(minus, shifted, params);
      jac.col(g.slot) = 0.5 * (run_suffix(std::move(plus), gi + 1) - run_suffix(std::move(minus), gi + 1));
    }
    apply_gate(prefix, g, params);
  }
  return jac;
}

Eigen::VectorXd parameter_shift_grad(const Circuit& circuit, std::span<const double> params, const ZObservable& obs,
                                     const StateVector& input) {
  return parameter_shift_jacobian(circuit, params, {obs}, input).row(0).transpose();
}

// --- QAOA ----------------------------------------------------------------------

IsingForm ising_form(const Qubo& q) {
  const int n = q.size();
  IsingForm out;
  out.h = Eigen::VectorXd::Zero(n);
  out.j = Eigen::MatrixXd::Zero(n, n);
  out.constant = q.offset();
  // x_i = (1 - z_i)/2.
  for (int i = 0; i < n; ++i) {
    out.constant += q.linear(i) / 2;
    out.h[i] -= q.linear(i) / 2;
  }
  for (int i = 0; i < n; ++i) {
    for (int k = i + 1; k < n; ++k) {
      const double u = q.upper()(i, k);
      if (u == 0.0) continue;
      out.constant += u / 4;
      out.h[i] -= u / 4;
      out.h[k] -= u / 4;
      out.j(i, k) += u / 4;
    }
  }
  return out;
}

double ising_scale(const IsingForm& ising) {
  const double hmax = ising.h.size() ? ising.h.cwiseAbs().maxCoeff() : 0.0;
  const double jmax = ising.j.size() ? ising.j.cwiseAbs().maxCoeff() : 0.0;
  return std::max(hmax, jmax);
}

namespace {

/// Cost-phase diagonal: the Ising energy without its constant, divided by its
/// scale. sum h z + sum J z z equals E(x) - constant exactly, so the energy
/// diagonal is reused instead of re-expanding spins.
Eigen::VectorXd phase_diagonal(const Qubo& q) {
  const IsingForm ising = ising_form(q);
  const double scale = ising_scale(ising);
  if (scale == 0.0) return Eigen::VectorXd::Zero(Eigen::Index{1} << q.size());
  return (energy_diagonal(q).array() - ising.constant) / scale;
}

void apply_qaoa_layers(StateVector& state, const Eigen::VectorXd& phase, std::span<const double> gammas,
                       std::span<const double> betas) {
  auto& a = state.amplitudes();
  for (std::size_t l = 0; l < gammas.size(); ++l) {
    const double g = gammas[l];
    const Eigen::ArrayXd angle = -g * phase.array();
    const Eigen::ArrayXd re = angle.cos();
    const Eigen::ArrayXd im = angle.sin();
    for (Eigen::Index b = 0; b < a.size(); ++b)
      a[b] = {re[b] * a[b].real() - im[b] * a[b].imag(), re[b] * a[b].imag() + im[b] * a[b].real()};
    for (int qb = 0; qb < state.num_qubits(); ++qb) apply_rx(state, qb, 2.0 * betas[l]);
  }
}

using Objective = std::function<double(const std::vector<double>&)>;

/// Minimizes f with at most `budget` evaluations; f records its own history.
void nelder_mead(const Objective& f, std::vector<double> x0, double step, int budget) {
  const std::size_t dim = x0.size();
  int used = 0;
  auto eval = [&](const std::vector<double>& x) {
    ++used;
    return f(x);
  };
  std::vector<std::vector<double>> simplex{x0};
  std::vector<double> values{eval(x0)};
  for (std::size_t d = 0; d < dim && used < budget; ++d) {
    auto x = x0;
    x[d] += step;
    simplex.push_back(x);
    values.push_back(eval(x));
  }
  if (simplex.size() < dim + 1) return;

  std::vector<std::size_t> order(dim + 1);
  while (used < budget) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[dim - 1];

    std::vector<double> centroid(dim, 0.0);
    for (std::size_t k = 0; k < dim; ++k)
      for (std::size_t d = 0; d < dim; ++d) centroid[d] += simplex[order[k]][d] / static_cast<double>(dim);
    auto along = [&](double t) {
      std::vector<double> x(dim);
      for (std::size_t d = 0; d < dim; ++d) x[d] = centroid[d] + t * (simplex[worst][d] - centroid[d]);
      return x;
    };

    const auto reflected = along(-1.0);
    const double fr = eval(reflected);
    if (fr < values[best]) {
      if (used >= budget) {
        simplex[worst] = reflected;
        values[worst] = fr;
        break;
      }
      const auto expanded = along(-2.0);
      const double fe = eval(expanded);
      if (fe < fr) {
        simplex[worst] = expanded;
        values[worst] = fe;
      } else {
        simplex[worst] = reflected;
        values[worst] = fr;
      }
    } else if (fr < values[second]) {
      simplex[worst] = reflected;
      values[worst] = fr;
    } else {
      if (used >= budget) break;
      const bool outside = fr < values[worst];
      const auto contracted = along(outside ? -0.5 : 0.5);
      const double fc = eval(contracted);
      if (fc < std::min(fr, values[worst])) {
        simplex[worst] = contracted;
        values[worst] = fc;
      } else {
        for (std::size_t k = 1; k <= dim && used < budget; ++k) {
          const std::size_t idx = order[k];
          for (std::size_t d = 0; d < dim; ++d)
            simplex[idx][d] = simplex[best][d] + 0.5 * (simplex[idx][d] - simplex[best][d]);
          values[idx] = eval(simplex[idx]);
        }
      }
    }
  }
}

/// Pattern search: try +-step on each coordinate, halve the step after a
/// sweep without improvement.
void coordinate_grid(const Objective& f, std::vector<double> x, double step, int budget) {
  int used = 1;
  double fx = f(x);
  while (used < budget && step > 1e-6) {
    bool improved = false;
    for (std::size_t d = 0; d < x.size() && used < budget; ++d) {
      for (double sign : {1.0, -1.0}) {
        if (used >= budget) break;
        auto y = x;
        y[d] += sign * step;
        const double fy = f(y);
        ++used;
        if (fy < fx) {
          x = std::move(y);
          fx = fy;
          improved = true;
          break;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
}

struct Candidate {
  std::uint64_t index;
  double value;
};

bool candidate_less(const Candidate& a, const Candidate& b, int n) {
  if (a.value != b.value) return a.value < b.value;
  return bits_from_index(a.index, n) < bits_from_index(b.index, n);
}

}  // namespace

StateVector qaoa_state(const Qubo& q, std::span<const double> gammas, std::span<const double> betas) {
  require(q.size() <= kMaxQubits, "qaoa_state: " + std::to_string(q.size()) + " variables exceed the " +
                                      std::to_string(kMaxQubits) + "-qubit cap");
  require(gammas.size() == betas.size() && !gammas.empty(), "qaoa_state: need p >= 1 gammas and betas of equal length");
  StateVector state = StateVector::uniform(q.size());
  apply_qaoa_layers(state, phase_diagonal(q), gammas, betas);
  return state;
}

void QaoaConfig::validate() const {
  require(depth_p >= 1, "qaoa.depth_p must be >= 1");
  require(shots >= 1, "qaoa.shots must be >= 1");
  require(restarts >= 1, "qaoa.restarts must be >= 1");
  require(evals_per_restart >= 1, "qaoa.evals_per_restart must be >= 1");
}

QaoaResult qaoa_solve(const Qubo& q, const QaoaConfig& cfg) {
  cfg.validate();
  const int n = q.size();
  require(n <= kMaxQubits, "qaoa_solve: " + std::to_string(n) + " variables exceed the " +
                               std::to_string(kMaxQubits) + "-qubit cap");
  QaoaResult result;
  if (n == 0) {
    result.value = q.offset();
    return result;
  }
  const Eigen::VectorXd diag = energy_diagonal(q);
  const Eigen::VectorXd phase = phase_diagonal(q);
  const std::size_t p = static_cast<std::size_t>(cfg.depth_p);

  Candidate best{0, std::numeric_limits<double>::infinity()};
  std::unordered_set<std::uint64_t> seen;
  auto observe = [&](std::uint64_t index) {
    if (!seen.insert(index).second) return;
    const Candidate c{index, q.energy_of_index(index)};
    if (candidate_less(c, best, n)) best = c;
  };

  double best_expectation = std::numeric_limits<double>::infinity();
  for (int r = 0; r < cfg.restarts; ++r) {
    std::vector<double> angles(2 * p);
    if (r == 0) {
      std::fill(angles.begin(), angles.begin() + static_cast<long>(p), 0.1);
      std::fill(angles.begin() + static_cast<long>(p), angles.end(), 0.4);
    } else {
      CounterRng rng(derive_seed(cfg.seed, "qaoa.init", static_cast<std::uint64_t>(r)));
      for (auto& a : angles) a = std::numbers::pi * rng.uniform();
    }

    int eval_index = 0;
    double restart_best = std::numeric_limits<double>::infinity();
    std::vector<double> restart_angles = angles;
    const Objective objective = [&](const std::vector<double>& x) {
      StateVector state = StateVector::uniform(n);
      const std::span<const double> all(x);
      apply_qaoa_layers(state, phase, all.first(p), all.subspan(p));
      const Eigen::VectorXd probs = state.probabilities();
      const double value = probs.dot(diag);
      Eigen::Index mode = 0;
      probs.maxCoeff(&mode);
      observe(static_cast<std::uint64_t>(mode));
      result.trace.push_back({r, eval_index++, value});
      if (value < restart_best) {
        restart_best = value;
        restart_angles = x;
      }
      return value;
    };

    if (cfg.angle_optimizer == AngleOptimizer::NelderMead) {
      nelder_mead(objective, angles, 0.25, cfg.evals_per_restart);
    } else {
      coordinate_grid(objective, angles, std::numbers::pi / 8, cfg.evals_per_restart);
    }

    // Sample the restart's best state.
    StateVector state = StateVector::uniform(n);
    const std::span<const double> all(restart_angles);
    apply_qaoa_layers(state, phase, all.first(p), all.subspan(p));
    Eigen::VectorXd cdf = state.probabilities();
    for (Eigen::Index i = 1; i < cdf.size(); ++i) cdf[i] += cdf[i - 1];
    CounterRng rng(derive_seed(cfg.seed, "qaoa.shots", static_cast<std::uint64_t>(r)));
    for (int s = 0; s < cfg.shots; ++s) {
      const double u = rng.uniform() * cdf[cdf.size() - 1];
      const auto it = std::upper_bound(cdf.data(), cdf.data() + cdf.size(), u);
      observe(static_cast<std::uint64_t>(std::min<Eigen::Index>(it - cdf.data(), cdf.size() - 1)));
    }

    if (restart_best < best_expectation) {
      best_expectation = restart_best;
      result.gammas.assign(restart_angles.begin(), restart_angles.begin() + static_cast<long>(p));
      result.betas.assign(restart_angles.begin() + static_cast<long>(p), restart_angles.end());
    }
  }
  result.x = bits_from_index(best.index, n);
  result.value = energy(q, std::span<const std::uint8_t>(result.x));
  return result;
}

std::string qaoa_trace_csv(const std::vector<QaoaTracePoint>& trace) {
  std::ostringstream out;
  out.precision(17);
  out << "restart,evaluation,expectation\n";
  for (const auto& t : trace) out << t.restart << ',' << t.evaluation << ',' << t.expectation << '\n';
  return out.str();
}

}  // namespace qfl
