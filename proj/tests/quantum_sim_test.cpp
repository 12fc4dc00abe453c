#include "oracles.hpp"

#include "qfl/errors.hpp"
#include "qfl/quantum_sim.hpp"
#include "qfl/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

using namespace qfl;
using cd = std::complex<double>;

namespace {

/// Full 2^n operator of a one-qubit matrix acting on qubit q.
Eigen::MatrixXcd embed(const Eigen::Matrix2cd& m, int q, int n) {
  const Eigen::Index dim = Eigen::Index{1} << n;
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(dim, dim);
  for (Eigen::Index r = 0; r < dim; ++r)
    for (Eigen::Index c = 0; c < dim; ++c)
      if ((r & ~(Eigen::Index{1} << q)) == (c & ~(Eigen::Index{1} << q))) out(r, c) = m((r >> q) & 1, (c >> q) & 1);
  return out;
}

Eigen::VectorXcd random_state(int n, std::uint64_t seed) {
  CounterRng rng(seed);
  Eigen::VectorXcd v(Eigen::Index{1} << n);
  for (auto& a : v) a = {rng.uniform() - 0.5, rng.uniform() - 0.5};
  return v / v.norm();
}

StateVector from(const Eigen::VectorXcd& v, int n) {
  StateVector s(n);
  s.amplitudes() = v;
  return s;
}

Circuit random_circuit(int qubits, int params, CounterRng& rng) {
  Circuit c(qubits);
  const GateKind kinds[] = {GateKind::RX, GateKind::RY, GateKind::RZ};
  for (int slot = 0; slot < params; ++slot) {
    c.rotation(kinds[rng() % 3], static_cast<int>(rng() % static_cast<std::uint64_t>(qubits)), slot);
    if (qubits > 1 && rng() % 2) {
      const int a = static_cast<int>(rng() % static_cast<std::uint64_t>(qubits));
      c.cnot(a, (a + 1) % qubits);
    }
    if (rng() % 3 == 0) c.h(static_cast<int>(rng() % static_cast<std::uint64_t>(qubits)));
  }
  return c;
}

std::vector<double> random_angles(int count, CounterRng& rng) {
  std::vector<double> out(static_cast<std::size_t>(count));
  for (auto& v : out) v = 2.0 * std::numbers::pi * rng.uniform() - std::numbers::pi;
  return out;
}

}  // namespace

TEST_CASE("one-qubit kernels match dense operators") {
  const int n = 3;
  const double t = 0.83;
  const double c = std::cos(t / 2);
  const double s = std::sin(t / 2);
  Eigen::Matrix2cd rx, ry, rz, h;
  rx << c, cd(0, -s), cd(0, -s), c;
  ry << c, -s, s, c;
  rz << std::polar(1.0, -t / 2), 0, 0, std::polar(1.0, t / 2);
  h << 1, 1, 1, -1;
  h /= std::sqrt(2.0);
  for (int q = 0; q < n; ++q) {
    const Eigen::VectorXcd v = random_state(n, 40 + static_cast<std::uint64_t>(q));
    StateVector a = from(v, n), b = from(v, n), d = from(v, n), e = from(v, n);
    apply_rx(a, q, t);
    apply_ry(b, q, t);
    apply_rz(d, q, t);
    apply_h(e, q);
    CHECK((a.amplitudes() - embed(rx, q, n) * v).norm() < 1e-14);
    CHECK((b.amplitudes() - embed(ry, q, n) * v).norm() < 1e-14);
    CHECK((d.amplitudes() - embed(rz, q, n) * v).norm() < 1e-14);
    CHECK((e.amplitudes() - embed(h, q, n) * v).norm() < 1e-14);
  }
}

TEST_CASE("two-qubit kernels permute and flip signs by basis index") {
  const int n = 3;
  const Eigen::VectorXcd v = random_state(n, 7);
  StateVector cz = from(v, n);
  StateVector cx = from(v, n);
  apply_cz(cz, 0, 2);
  apply_cnot(cx, 2, 1);
  for (Eigen::Index b = 0; b < 8; ++b) {
    const double sign = ((b & 1) && (b & 4)) ? -1.0 : 1.0;
    CHECK(std::abs(cz.amplitudes()[b] - sign * v[b]) < 1e-15);
    const Eigen::Index src = (b & 4) ? (b ^ 2) : b;
    CHECK(std::abs(cx.amplitudes()[b] - v[src]) < 1e-15);
  }
  CHECK_THROWS_AS(apply_cz(cz, 1, 1), ValidationError);
  CHECK_THROWS_AS(apply_rx(cz, 3, 0.1), ValidationError);
}

TEST_CASE("norm drift stays below 1e-9 over 1000 random gates") {
  CounterRng rng(derive_seed(1, "test.unitarity"));
  StateVector s = from(random_state(7, 3), 7);
  for (int g = 0; g < 1000; ++g) {
    const int q = static_cast<int>(rng() % 7);
    const int r = (q + 1 + static_cast<int>(rng() % 6)) % 7;
    const double a = 4.0 * std::numbers::pi * rng.uniform();
    switch (rng() % 6) {
      case 0: apply_rx(s, q, a); break;
      case 1: apply_ry(s, q, a); break;
      case 2: apply_rz(s, q, a); break;
      case 3: apply_h(s, q); break;
      case 4: apply_cz(s, q, r); break;
      default: apply_cnot(s, q, r); break;
    }
  }
  CHECK(std::abs(s.norm() - 1.0) <= 1e-9);
}

TEST_CASE("shift rule on a single RY") {
  Circuit c(1);
  c.rotation(GateKind::RY, 0, 0);
  const std::vector<double> theta{0.7};
  CHECK(parameter_shift_grad(c, theta, {{0}}, StateVector(1))[0] == doctest::Approx(-std::sin(0.7)).epsilon(1e-10));
  const std::vector<double> zero{0.0};
  CHECK(std::abs(parameter_shift_grad(c, zero, {{0}}, StateVector(1))[0]) < 1e-12);
}

TEST_CASE("shift rule matches central differences on random circuits") {
  CounterRng rng(derive_seed(2, "test.shift"));
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const int qubits = 1 + t % 6;
    const int params = 1 + (t * 5) % 12;
    const Circuit c = random_circuit(qubits, params, rng);
    const std::vector<double> theta = random_angles(params, rng);
    const ZObservable obs{t % 2 ? std::vector<int>{0} : std::vector<int>{0, qubits - 1}};
    const StateVector input = from(random_state(qubits, 100 + static_cast<std::uint64_t>(t)), qubits);
    const Eigen::VectorXd grad = parameter_shift_grad(c, theta, obs, input);
    auto f = [&](const std::vector<double>& x) { return expect_z(apply(input, c, x), obs); };
    for (int k = 0; k < params; ++k)
      worst = std::max(worst, std::abs(grad[k] - oracle::central_difference(f, theta, static_cast<std::size_t>(k), 1e-5)));
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("jacobian rows agree with single-observable gradients") {
  CounterRng rng(derive_seed(3, "test.jacobian"));
  const Circuit c = random_circuit(4, 8, rng);
  const std::vector<double> theta = random_angles(8, rng);
  const std::vector<ZObservable> obs{{{0}}, {{1, 3}}, {{2}}};
  const Eigen::MatrixXd jac = parameter_shift_jacobian(c, theta, obs, StateVector(4));
  for (int r = 0; r < 3; ++r)
    CHECK((jac.row(r).transpose() - parameter_shift_grad(c, theta, obs[static_cast<std::size_t>(r)], StateVector(4)))
              .norm() < 1e-14);
}

TEST_CASE("shift rule rejects non-rotation and shared slots") {
  Circuit bad(2);
  bad.add({GateKind::H, 0, -1, 0, 0.0});
  CHECK_THROWS_AS(parameter_shift_grad(bad, std::vector<double>{0.1}, {{0}}, StateVector(2)), ValidationError);
  Circuit shared(2);
  shared.rotation(GateKind::RX, 0, 0).rotation(GateKind::RY, 1, 0);
  CHECK_THROWS_AS(parameter_shift_grad(shared, std::vector<double>{0.1}, {{0}}, StateVector(2)), ValidationError);
  Circuit gap(1);
  gap.rotation(GateKind::RX, 0, 1);
  CHECK_THROWS_AS(gap.validate(), ValidationError);
}

TEST_CASE("expect_qubo is the probability-weighted energy") {
  const Qubo q = random_qubo(5, 12);
  const oracle::Extremes ex = oracle::qubo_extremes(q);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const StateVector s = from(random_state(5, seed), 5);
    double direct = 0.0;
    for (std::uint64_t b = 0; b < 32; ++b) direct += std::norm(s.amplitudes()[static_cast<Eigen::Index>(b)]) * oracle::qubo_energy(q, b);
    const double e = expect_qubo(s, q);
    CHECK(e == doctest::Approx(direct).epsilon(1e-12));
    CHECK(e >= ex.min - 1e-12);
    CHECK(e <= ex.max + 1e-12);
  }
}

TEST_CASE("ising form reproduces the qubo energy") {
  const Qubo q = random_qubo(6, 5);
  const IsingForm is = ising_form(q);
  for (std::uint64_t b = 0; b < 64; ++b) {
    double e = is.constant;
    for (int i = 0; i < 6; ++i) {
      const double zi = ((b >> i) & 1U) ? -1.0 : 1.0;
      e += is.h[i] * zi;
      for (int j = i + 1; j < 6; ++j) e += is.j(i, j) * zi * (((b >> j) & 1U) ? -1.0 : 1.0);
    }
    CHECK(e == doctest::Approx(oracle::qubo_energy(q, b)).epsilon(1e-12));
  }
  CHECK(ising_scale(is) > 0.0);
}

TEST_CASE("qaoa on separable and constant forms") {
  Qubo sep(3, 0.5);
  for (int i = 0; i < 3; ++i) sep.add_linear(i, -1.0);
  const QaoaResult r = qaoa_solve(sep, QaoaConfig{.seed = 1});
  CHECK(r.x == BitString{1, 1, 1});
  CHECK(r.value == doctest::Approx(-2.5));
  CHECK(r.gammas.size() == 3);
  CHECK(r.betas.size() == 3);
  CHECK_FALSE(r.trace.empty());

  const QaoaResult flat = qaoa_solve(Qubo(4, 1.25), QaoaConfig{.restarts = 1});
  CHECK(flat.value == 1.25);
}

TEST_CASE("qaoa meets the oracle batch thresholds") {
  int within = 0;
  int exact = 0;
  for (int m = 0; m < 50; ++m) {
    const int n = 1 + m % 10;
    const Qubo q = random_qubo(n, derive_seed(11, "test.qaoa_batch", static_cast<std::uint64_t>(m)));
    const oracle::Extremes ex = oracle::qubo_extremes(q);
    const QaoaResult r = qaoa_solve(q, QaoaConfig{.seed = static_cast<std::uint64_t>(m)});
    CHECK(r.value >= ex.min - 1e-12);
    CHECK(r.value == doctest::Approx(oracle::qubo_energy(q, index_from_bits(r.x))).epsilon(1e-12));
    within += r.value <= ex.min + 0.05 * (ex.max - ex.min);
    exact += r.value <= ex.min + 1e-9;
  }
  CHECK(within >= 45);
  CHECK(exact >= 40);
}

TEST_CASE("qaoa is deterministic and size-capped") {
  const Qubo q = random_qubo(7, 3);
  const QaoaConfig cfg{.shots = 64, .restarts = 2, .seed = 5};
  const QaoaResult a = qaoa_solve(q, cfg);
  const QaoaResult b = qaoa_solve(q, cfg);
  CHECK(a.x == b.x);
  CHECK(a.gammas == b.gammas);
  CHECK(qaoa_trace_csv(a.trace) == qaoa_trace_csv(b.trace));
  CHECK(qaoa_trace_csv(a.trace).rfind("restart,evaluation,expectation\n", 0) == 0);
  CHECK_THROWS_AS(qaoa_solve(Qubo(kMaxQubits + 1), cfg), ValidationError);
  CHECK_THROWS_AS(qaoa_solve(q, QaoaConfig{.depth_p = 0}), ValidationError);
}

TEST_CASE("qaoa state is normalized and starts uniform at zero angles") {
  const Qubo q = random_qubo(5, 8);
  const std::vector<double> g{0.3, 0.9};
  const std::vector<double> b{0.2, 0.4};
  CHECK(std::abs(qaoa_state(q, g, b).norm() - 1.0) < 1e-12);
  const std::vector<double> zero{0.0};
  const StateVector s = qaoa_state(q, zero, zero);
  CHECK((s.probabilities().array() - 1.0 / 32.0).abs().maxCoeff() < 1e-15);
}
