#pragma once

#include "qfl/errors.hpp"
#include "qfl/qubo.hpp"

#include <Eigen/Core>

#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace qfl {

inline constexpr int kMaxQubits = 20;

/// Dense 2^n amplitude vector. Qubit q is bit q of the basis index, so basis
/// index b encodes the bitstring bits_from_index(b, n).
template <typename Real>
class BasicStateVector {
 public:
  using Complex = std::complex<Real>;
  using Amplitudes = Eigen::Matrix<Complex, Eigen::Dynamic, 1>;
  using RealVector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

  /// |0...0>.
  explicit BasicStateVector(int n_qubits = 0) : n_(n_qubits) {
    require(n_qubits >= 0 && n_qubits <= kMaxQubits,
            "state vector supports 0.." + std::to_string(kMaxQubits) + " qubits, got " + std::to_string(n_qubits));
    amps_ = Amplitudes::Zero(Eigen::Index{1} << n_qubits);
    amps_[0] = Complex(1);
  }

  static BasicStateVector uniform(int n_qubits) {
    BasicStateVector s(n_qubits);
    s.amps_.setConstant(Complex(Real(1) / std::sqrt(static_cast<Real>(s.amps_.size()))));
    return s;
  }

  int num_qubits() const { return n_; }
  Eigen::Index dimension() const { return amps_.size(); }
  const Amplitudes& amplitudes() const { return amps_; }
  Amplitudes& amplitudes() { return amps_; }

  Real norm() const { return amps_.norm(); }
  RealVector probabilities() const { return amps_.cwiseAbs2(); }

 private:
  int n_;
  Amplitudes amps_;
};

using StateVector = BasicStateVector<double>;

// --- gate kernels --------------------------------------------------------------

namespace detail {

template <typename Real>
void check_qubit(const BasicStateVector<Real>& s, int q) {
  require(q >= 0 && q < s.num_qubits(), "qubit index " + std::to_string(q) + " out of range");
}

/// Applies [[m00, m01], [m10, m11]] to qubit q.
template <typename Real>
void apply_1q(BasicStateVector<Real>& s, int q, std::complex<Real> m00, std::complex<Real> m01,
              std::complex<Real> m10, std::complex<Real> m11) {
  check_qubit(s, q);
  auto& a = s.amplitudes();
  const Eigen::Index stride = Eigen::Index{1} << q;
  // Products written out: std::complex operator* carries inf/nan recovery.
  auto mul = [](std::complex<Real> m, std::complex<Real> v) {
    return std::complex<Real>(m.real() * v.real() - m.imag() * v.imag(), m.real() * v.imag() + m.imag() * v.real());
  };
  for (Eigen::Index base = 0; base < a.size(); base += 2 * stride) {
    for (Eigen::Index off = base; off < base + stride; ++off) {
      const auto lo = a[off];
      const auto hi = a[off + stride];
      a[off] = mul(m00, lo) + mul(m01, hi);
      a[off + stride] = mul(m10, lo) + mul(m11, hi);
    }
  }
}

}  // namespace detail

template <typename Real>
void apply_rx(BasicStateVector<Real>& s, int q, Real theta) {
  using C = std::complex<Real>;
  detail::check_qubit(s, q);
  const Real c = std::cos(theta / 2);
  const Real sn = std::sin(theta / 2);
  auto& a = s.amplitudes();
  const Eigen::Index stride = Eigen::Index{1} << q;
  for (Eigen::Index base = 0; base < a.size(); base += 2 * stride) {
    for (Eigen::Index off = base; off < base + stride; ++off) {
      const C lo = a[off];
      const C hi = a[off + stride];
      a[off] = C(c * lo.real() + sn * hi.imag(), c * lo.imag() - sn * hi.real());
      a[off + stride] = C(c * hi.real() + sn * lo.imag(), c * hi.imag() - sn * lo.real());
    }
  }
}

template <typename Real>
void apply_ry(BasicStateVector<Real>& s, int q, Real theta) {
  using C = std::complex<Real>;
  const Real c = std::cos(theta / 2);
  const Real sn = std::sin(theta / 2);
  detail::apply_1q(s, q, C(c), C(-sn), C(sn), C(c));
}

template <typename Real>
void apply_rz(BasicStateVector<Real>& s, int q, Real theta) {
  using C = std::complex<Real>;
  const C lo = std::polar(Real(1), -theta / 2);
  const C hi = std::polar(Real(1), theta / 2);
  detail::apply_1q(s, q, lo, C(0), C(0), hi);
}

template <typename Real>
void apply_h(BasicStateVector<Real>& s, int q) {
  using C = std::complex<Real>;
  const Real r = Real(1) / std::sqrt(Real(2));
  detail::apply_1q(s, q, C(r), C(r), C(r), C(-r));
}

template <typename Real>
void apply_cz(BasicStateVector<Real>& s, int a, int b) {
  detail::check_qubit(s, a);
  detail::check_qubit(s, b);
  require(a != b, "cz needs two distinct qubits");
  const Eigen::Index mask = (Eigen::Index{1} << a) | (Eigen::Index{1} << b);
  auto& amps = s.amplitudes();
  for (Eigen::Index i = 0; i < amps.size(); ++i)
    if ((i & mask) == mask) amps[i] = -amps[i];
}

template <typename Real>
void apply_cnot(BasicStateVector<Real>& s, int control, int target) {
  detail::check_qubit(s, control);
  detail::check_qubit(s, target);
  require(control != target, "cnot needs two distinct qubits");
  const Eigen::Index cbit = Eigen::Index{1} << control;
  const Eigen::Index tbit = Eigen::Index{1} << target;
  auto& amps = s.amplitudes();
  for (Eigen::Index i = 0; i < amps.size(); ++i)
    if ((i & cbit) && !(i & tbit)) std::swap(amps[i], amps[i | tbit]);
}

// --- circuits ------------------------------------------------------------------

enum class GateKind { RX, RY, RZ, H, CZ, CNOT };

bool is_rotation(GateKind kind);

/// One gate. A rotation's angle is params[slot] when slot >= 0, else `angle`.
struct Gate {
  GateKind kind;
  int q0;
  int q1 = -1;
  int slot = -1;
  double angle = 0.0;
};

class Circuit {
 public:
  explicit Circuit(int n_qubits = 0) : n_qubits_(n_qubits) {}

  int num_qubits() const { return n_qubits_; }
  const std::vector<Gate>& gates() const { return gates_; }
  /// One past the highest slot index used.
  int num_params() const;

  Circuit& rotation(GateKind kind, int q, int slot);
  Circuit& fixed_rotation(GateKind kind, int q, double angle);
  Circuit& h(int q);
  Circuit& cz(int a, int b);
  Circuit& cnot(int control, int target);
  Circuit& add(const Gate& g);

  /// Qubit range, two-qubit distinctness, contiguous slots from 0.
  void validate() const;

 private:
  int n_qubits_;
  std::vector<Gate> gates_;
};

void apply_gate(StateVector& state, const Gate& gate, std::span<const double> params);

/// Applies the circuit in order.
StateVector apply(StateVector state, const Circuit& circuit, std::span<const double> params);

/// Product of Pauli-Z on the listed qubits; one qubit is a single-qubit Z.
struct ZObservable {
  std::vector<int> qubits;
};

double expect_z(const StateVector& state, const ZObservable& obs);

/// E(x) for every basis index, O(n 2^n).
Eigen::VectorXd energy_diagonal(const Qubo& q);

/// sum_x |<x|psi>|^2 energy(q, x).
double expect_qubo(const StateVector& state, const Qubo& q);

/// Gradient of <obs> in every parameter slot by the +-pi/2 shift rule.
Eigen::VectorXd parameter_shift_grad(const Circuit& circuit, std::span<const double> params,
                                     const ZObservable& obs, const StateVector& input);

/// Rows = observables, columns = slots; one shifted simulation serves all rows.
Eigen::MatrixXd parameter_shift_jacobian(const Circuit& circuit, std::span<const double> params,
                                         const std::vector<ZObservable>& observables, const StateVector& input);

// --- QAOA ----------------------------------------------------------------------

/// E(x) = constant + sum_i h_i z_i + sum_{i<j} J_ij z_i z_j with z_i = 1 - 2 x_i.
struct IsingForm {
  double constant = 0.0;
  Eigen::VectorXd h;
  Eigen::MatrixXd j;  // strictly upper triangular
};

IsingForm ising_form(const Qubo& q);

/// Largest |h_i| or |J_ij|; the cost phase is divided by it so that angle
/// ranges do not depend on the Qubo's units.
double ising_scale(const IsingForm& ising);

StateVector qaoa_state(const Qubo& q, std::span<const double> gammas, std::span<const double> betas);

enum class AngleOptimizer { CoordinateGrid, NelderMead };

struct QaoaConfig {
  int depth_p = 3;
  int shots = 1024;
  AngleOptimizer angle_optimizer = AngleOptimizer::NelderMead;
  int restarts = 5;
  int evals_per_restart = 150;
  std::uint64_t seed = 0;

  void validate() const;
};

struct QaoaTracePoint {
  int restart;
  int evaluation;
  double expectation;
};

struct QaoaResult {
  BitString x;
  double value = 0.0;
  std::vector<double> gammas;
  std::vector<double> betas;
  std::vector<QaoaTracePoint> trace;
};

QaoaResult qaoa_solve(const Qubo& q, const QaoaConfig& cfg);

/// restart,evaluation,expectation
std::string qaoa_trace_csv(const std::vector<QaoaTracePoint>& trace);

}  // namespace qfl
