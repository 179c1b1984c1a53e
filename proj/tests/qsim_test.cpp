#include "qtrust/qsim.hpp"

#include <cmath>

#include "gtest/gtest.h"

using namespace qtrust;
using namespace qtrust::qsim;

namespace {

constexpr double kPi = 3.14159265358979323846;

Circuit random_circuit(int n_qubits, int n_gates, RngStream& rng) {
  Circuit c;
  c.n_qubits = n_qubits;
  for (int g = 0; g < n_gates; ++g) {
    double pick = rng.uniform();
    int target = static_cast<int>(rng.index(static_cast<std::size_t>(n_qubits)));
    if (pick < 0.4) {
      c.gates.push_back(Gate::ry(rng.uniform(-kPi, kPi), target));
    } else if (pick < 0.8) {
      c.gates.push_back(Gate::rz(rng.uniform(-kPi, kPi), target));
    } else {
      int control = (target + 1 + static_cast<int>(rng.index(static_cast<std::size_t>(n_qubits - 1)))) % n_qubits;
      c.gates.push_back(Gate::cnot(control, target));
    }
  }
  return c;
}

Statevector random_state(int n_qubits, RngStream& rng) {
  auto s = Statevector::zero_state(n_qubits);
  return run_circuit(random_circuit(n_qubits, 12, rng), s);
}

}  // namespace

TEST(ApplyGate, RyPiFlipsQubit) {
  auto s = apply_gate(Statevector::zero_state(1), Gate::ry(kPi, 0));
  EXPECT_NEAR(std::norm(s.amplitudes[1]), 1.0, 1e-12);
  EXPECT_NEAR(std::norm(s.amplitudes[0]), 0.0, 1e-12);
}

TEST(ApplyGate, RyZeroIsIdentity) {
  RngStream rng(11);
  auto s = random_state(2, rng);
  auto t = apply_gate(s, Gate::ry(0.0, 1));
  for (std::size_t i = 0; i < s.dim(); ++i) {
    EXPECT_NEAR(std::abs(s.amplitudes[i] - t.amplitudes[i]), 0.0, 1e-12);
  }
}

TEST(ApplyGate, CnotBuildsBellState) {
  auto s = Statevector::zero_state(2);
  s = apply_gate(s, Gate::ry(kPi / 2.0, 0));  // (|00> + |10>)/sqrt2 with q0 in bit 0
  s = apply_gate(s, Gate::cnot(0, 1));
  EXPECT_NEAR(std::norm(s.amplitudes[0]), 0.5, 1e-12);
  EXPECT_NEAR(std::norm(s.amplitudes[3]), 0.5, 1e-12);
  EXPECT_NEAR(std::norm(s.amplitudes[1]) + std::norm(s.amplitudes[2]), 0.0, 1e-12);
}

TEST(ApplyGate, RejectsBadIndices) {
  auto s = Statevector::zero_state(2);
  EXPECT_THROW(apply_gate(s, Gate::ry(0.1, 2)), std::out_of_range);
  EXPECT_THROW(apply_gate(s, Gate::cnot(1, 1)), std::invalid_argument);
}

TEST(RunCircuit, EmptyCircuitIsIdentity) {
  RngStream rng(3);
  auto s = random_state(2, rng);
  Circuit empty;
  empty.n_qubits = 2;
  auto t = run_circuit(empty, s);
  for (std::size_t i = 0; i < s.dim(); ++i) {
    EXPECT_EQ(s.amplitudes[i], t.amplitudes[i]);
  }
}

TEST(RunCircuit, HalfPiRyGivesBalancedProbabilities) {
  Circuit c;
  c.n_qubits = 1;
  c.gates.push_back(Gate::ry(kPi / 2.0, 0));
  auto s = run_circuit(c, Statevector::zero_state(1));
  auto [p0, p1] = born_probabilities(s, 0);
  EXPECT_NEAR(p0, 0.5, 1e-12);
  EXPECT_NEAR(p1, 0.5, 1e-12);
}

TEST(RunCircuit, SequentialRyAnglesAdd) {
  RngStream rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    double a = rng.uniform(-kPi, kPi), b = rng.uniform(-kPi, kPi);
    Circuit two;
    two.n_qubits = 1;
    two.gates = {Gate::ry(a, 0), Gate::ry(b, 0)};
    Circuit one;
    one.n_qubits = 1;
    one.gates = {Gate::ry(a + b, 0)};
    auto s2 = run_circuit(two, Statevector::zero_state(1));
    auto s1 = run_circuit(one, Statevector::zero_state(1));
    EXPECT_NEAR(trace_distance_pure(s1, s2), 0.0, 1e-7);
  }
}

TEST(RunCircuit, RejectsDimensionMismatch) {
  Circuit c;
  c.n_qubits = 2;
  EXPECT_THROW(run_circuit(c, Statevector::zero_state(1)), std::invalid_argument);
}

TEST(ExpectationZ, EigenstatesAndSymmetry) {
  auto zero = Statevector::zero_state(1);
  EXPECT_NEAR(expectation_z(zero, 0), 1.0, 1e-12);
  auto one = apply_gate(zero, Gate::ry(kPi, 0));
  EXPECT_NEAR(expectation_z(one, 0), -1.0, 1e-12);
  auto plus = apply_gate(zero, Gate::ry(kPi / 2.0, 0));
  EXPECT_NEAR(expectation_z(plus, 0), 0.0, 1e-10);
  EXPECT_THROW(expectation_z(zero, 1), std::out_of_range);
}

TEST(BornProbabilities, ClosedFormRyAction) {
  // RY(2pi/3)|0> -> (cos^2(pi/3), sin^2(pi/3)) = (0.25, 0.75)
  auto s = apply_gate(Statevector::zero_state(1), Gate::ry(2.0 * kPi / 3.0, 0));
  auto [p0, p1] = born_probabilities(s, 0);
  EXPECT_NEAR(p0, 0.25, 1e-12);
  EXPECT_NEAR(p1, 0.75, 1e-12);
}

TEST(SampleShots, DegenerateDistribution) {
  RngStream rng(1);
  auto est = sample_shots(1.0, 0.0, 200, rng);
  EXPECT_EQ(est.counts[0], 200);
  EXPECT_EQ(est.counts[1], 0);
}

TEST(SampleShots, DeterministicUnderSeed) {
  RngStream a(42), b(42);
  auto ea = sample_shots(0.5, 0.5, 200, a);
  auto eb = sample_shots(0.5, 0.5, 200, b);
  EXPECT_EQ(ea.counts, eb.counts);
  EXPECT_THROW(sample_shots(0.5, 0.5, 0, a), std::invalid_argument);
}

TEST(SampleShots, BinomialVarianceAtHalf) {
  // Var[p_hat] at p = 0.5, S = 200 should be near p(1-p)/S = 0.00125.
  RngStream rng(7);
  const int reps = 10000, shots = 200;
  double sum = 0.0, sum_sq = 0.0;
  for (int r = 0; r < reps; ++r) {
    auto est = sample_shots(0.5, 0.5, shots, rng);
    double p = est.p_hat(1);
    sum += p;
    sum_sq += p * p;
  }
  double mean = sum / reps;
  double var = sum_sq / reps - mean * mean;
  EXPECT_NEAR(var, 0.00125, 0.00125 * 0.10);
}

TEST(SampleShots, ConvergesToTrueProbability) {
  RngStream rng(9);
  auto s = apply_gate(Statevector::zero_state(1), Gate::ry(1.234, 0));
  auto [p0, p1] = born_probabilities(s, 0);
  auto est = sample_shots(p0, p1, 100000, rng);
  EXPECT_NEAR(est.p_hat(1), p1, 0.01);
}

TEST(TraceDistance, EndpointCases) {
  auto zero = Statevector::zero_state(1);
  auto one = apply_gate(zero, Gate::ry(kPi, 0));
  auto plus = apply_gate(zero, Gate::ry(kPi / 2.0, 0));
  EXPECT_NEAR(trace_distance_pure(zero, zero), 0.0, 1e-12);
  EXPECT_NEAR(trace_distance_pure(zero, one), 1.0, 1e-12);
  EXPECT_NEAR(trace_distance_pure(zero, plus), std::sqrt(0.5), 1e-12);
  Statevector bigger = Statevector::zero_state(2);
  EXPECT_THROW(trace_distance_pure(zero, bigger), std::invalid_argument);
}

TEST(TraceDistance, GlobalPhaseInvariance) {
  RngStream rng(23);
  auto s = random_state(2, rng);
  auto t = s;
  for (auto& a : t.amplitudes) a *= std::polar(1.0, 0.7);
  EXPECT_NEAR(trace_distance_pure(s, t), 0.0, 1e-7);
}

TEST(Invariants, NormPreservedOnRandomCircuits) {
  RngStream rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    int n = 2 + static_cast<int>(rng.index(3));
    auto c = random_circuit(n, 20, rng);
    auto s = run_circuit(c, Statevector::zero_state(n));
    EXPECT_NEAR(s.norm_squared(), 1.0, 1e-9);
  }
}

TEST(Invariants, GateThenInverseRecoversState) {
  RngStream rng(37);
  for (int trial = 0; trial < 50; ++trial) {
    auto s = random_state(3, rng);
    auto c = random_circuit(3, 1, rng);
    auto t = apply_gate(apply_gate(s, c.gates[0]), c.gates[0].inverse());
    EXPECT_NEAR(trace_distance_pure(s, t), 0.0, 1e-7);
    for (std::size_t i = 0; i < s.dim(); ++i) {
      EXPECT_NEAR(std::abs(s.amplitudes[i] - t.amplitudes[i]), 0.0, 1e-9);
    }
  }
}

TEST(Invariants, TraceDistanceIsAMetricOnRandomTriples) {
  RngStream rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    auto a = random_state(2, rng);
    auto b = random_state(2, rng);
    auto c = random_state(2, rng);
    double dab = trace_distance_pure(a, b);
    double dba = trace_distance_pure(b, a);
    EXPECT_DOUBLE_EQ(dab, dba);
    EXPECT_LE(trace_distance_pure(a, c), dab + trace_distance_pure(b, c) + 1e-9);
  }
}
