#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "qtrust/rng.hpp"

namespace qtrust::qsim {

using cdouble = std::complex<double>;

// Dense statevector of an n-qubit register. Basis index b stores qubit q in
// bit (b >> q) & 1.
struct Statevector {
  int n_qubits = 0;
  std::vector<cdouble> amplitudes;

  static Statevector zero_state(int n_qubits) {
    if (n_qubits < 1 || n_qubits > 4) {
      throw std::invalid_argument("Statevector: n_qubits must be in [1, 4]");
    }
    Statevector s;
    s.n_qubits = n_qubits;
    s.amplitudes.assign(std::size_t{1} << n_qubits, cdouble{0.0, 0.0});
    s.amplitudes[0] = 1.0;
    return s;
  }

  std::size_t dim() const { return amplitudes.size(); }

  double norm_squared() const {
    double acc = 0.0;
    for (const auto& a : amplitudes) acc += std::norm(a);
    return acc;
  }
};

enum class GateKind { RY, RZ, CNOT };

struct Gate {
  GateKind kind;
  int target;
  int control;  // CNOT only, -1 otherwise
  double angle; // rotations only, radians

  static Gate ry(double angle, int target) { return {GateKind::RY, target, -1, angle}; }
  static Gate rz(double angle, int target) { return {GateKind::RZ, target, -1, angle}; }
  static Gate cnot(int control, int target) { return {GateKind::CNOT, target, control, 0.0}; }

  Gate inverse() const {
    switch (kind) {
      case GateKind::RY: return ry(-angle, target);
      case GateKind::RZ: return rz(-angle, target);
      case GateKind::CNOT: return *this;  // self-inverse
    }
    throw std::logic_error("unreachable");
  }
};

struct Circuit {
  int n_qubits = 0;
  std::vector<Gate> gates;
};

namespace detail {

inline void check_qubit(int q, int n_qubits, const char* what) {
  if (q < 0 || q >= n_qubits) throw std::out_of_range(std::string(what) + ": qubit index out of range");
}

}  // namespace detail

inline void apply_gate_inplace(Statevector& state, const Gate& gate) {
  detail::check_qubit(gate.target, state.n_qubits, "apply_gate");
  const std::size_t dim = state.dim();
  const std::size_t tmask = std::size_t{1} << gate.target;
  switch (gate.kind) {
    case GateKind::RY: {
      const double c = std::cos(gate.angle / 2.0);
      const double s = std::sin(gate.angle / 2.0);
      for (std::size_t b = 0; b < dim; ++b) {
        if (b & tmask) continue;
        cdouble a0 = state.amplitudes[b];
        cdouble a1 = state.amplitudes[b | tmask];
        state.amplitudes[b] = c * a0 - s * a1;
        state.amplitudes[b | tmask] = s * a0 + c * a1;
      }
      break;
    }
    case GateKind::RZ: {
      const cdouble e0 = std::polar(1.0, -gate.angle / 2.0);
      const cdouble e1 = std::polar(1.0, gate.angle / 2.0);
      for (std::size_t b = 0; b < dim; ++b) {
        state.amplitudes[b] *= (b & tmask) ? e1 : e0;
      }
      break;
    }
    case GateKind::CNOT: {
      detail::check_qubit(gate.control, state.n_qubits, "apply_gate");
      if (gate.control == gate.target) throw std::invalid_argument("apply_gate: CNOT control == target");
      const std::size_t cmask = std::size_t{1} << gate.control;
      for (std::size_t b = 0; b < dim; ++b) {
        if ((b & cmask) && !(b & tmask)) {
          std::swap(state.amplitudes[b], state.amplitudes[b | tmask]);
        }
      }
      break;
    }
  }
}

inline Statevector apply_gate(Statevector state, const Gate& gate) {
  apply_gate_inplace(state, gate);
  return state;
}

inline Statevector run_circuit(const Circuit& circuit, Statevector initial) {
  if (circuit.n_qubits != initial.n_qubits) {
    throw std::invalid_argument("run_circuit: circuit/state qubit count mismatch");
  }
  for (const Gate& g : circuit.gates) apply_gate_inplace(initial, g);
  return initial;
}

// Pauli-Z expectation on one qubit: sum of (+1/-1) * |amp|^2 by bit value.
inline double expectation_z(const Statevector& state, int qubit) {
  detail::check_qubit(qubit, state.n_qubits, "expectation_z");
  const std::size_t mask = std::size_t{1} << qubit;
  double acc = 0.0;
  for (std::size_t b = 0; b < state.dim(); ++b) {
    double p = std::norm(state.amplitudes[b]);
    acc += (b & mask) ? -p : p;
  }
  return acc;
}

// Marginal outcome probabilities (p0, p1) of measuring one qubit.
inline std::pair<double, double> born_probabilities(const Statevector& state, int qubit) {
  double z = expectation_z(state, qubit);
  double p1 = (1.0 - z) / 2.0;
  return {1.0 - p1, p1};
}

// Empirical outcome distribution from S measurement shots of a binary outcome.
struct ShotEstimate {
  std::array<std::int64_t, 2> counts{0, 0};
  std::int64_t shots = 0;

  double p_hat(int outcome) const {
    return static_cast<double>(counts[static_cast<std::size_t>(outcome)]) /
           static_cast<double>(shots);
  }
};

inline ShotEstimate sample_shots(double p0, double p1, std::int64_t shots, RngStream& rng) {
  if (shots < 1) throw std::invalid_argument("sample_shots: shots must be >= 1");
  if (std::abs(p0 + p1 - 1.0) > 1e-9 || p0 < -1e-12 || p1 < -1e-12) {
    throw std::invalid_argument("sample_shots: probabilities must be a distribution");
  }
  ShotEstimate est;
  est.shots = shots;
  for (std::int64_t s = 0; s < shots; ++s) {
    int outcome = rng.uniform() < p1 ? 1 : 0;
    ++est.counts[static_cast<std::size_t>(outcome)];
  }
  return est;
}

// Trace distance between pure states: sqrt(1 - |<a|b>|^2). Global phase drops
// out through the overlap magnitude.
inline double trace_distance_pure(const Statevector& a, const Statevector& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("trace_distance_pure: dimension mismatch");
  cdouble overlap{0.0, 0.0};
  for (std::size_t i = 0; i < a.dim(); ++i) {
    overlap += std::conj(a.amplitudes[i]) * b.amplitudes[i];
  }
  double fid = std::norm(overlap);
  return std::sqrt(std::max(0.0, 1.0 - fid));
}

}  // namespace qtrust::qsim
