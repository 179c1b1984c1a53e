#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qtrust/rng.hpp"
#include "qtrust/vqc.hpp"

namespace qtrust::adv {

using data::LabeledSample;
using vqc::VqcModel;

enum class AttackKind { Fgsm, Pgd, QuantumState };

inline const char* attack_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::Fgsm: return "fgsm";
    case AttackKind::Pgd: return "pgd";
    case AttackKind::QuantumState: return "quantum_state";
  }
  return "?";
}

struct AttackSpec {
  AttackKind kind = AttackKind::Fgsm;
  double epsilon = 0.0;  // feature units for FGSM/PGD, radians for QuantumState
  int pgd_steps = 10;
  std::uint64_t seed = 0;  // QuantumState only
};

inline double sign_of(double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); }

// One-shot signed-gradient attack on the squared hinge loss; gradients use
// exact expectation values via the parameter-shift rule.
inline std::array<double, 2> fgsm(const VqcModel& model, const std::array<double, 2>& x, int label,
                                  double epsilon) {
  if (epsilon < 0.0) throw std::invalid_argument("fgsm: epsilon must be >= 0");
  auto g = vqc::loss_gradient_inputs(model, x, label);
  return {x[0] + epsilon * sign_of(g[0]), x[1] + epsilon * sign_of(g[1])};
}

// Iterative signed-gradient ascent with projection onto the l-inf ball around
// x. Deterministic start at x, step size epsilon/steps.
inline std::array<double, 2> pgd(const VqcModel& model, const std::array<double, 2>& x, int label,
                                 double epsilon, int steps = 10,
                                 std::optional<double> step_size = std::nullopt) {
  if (epsilon < 0.0) throw std::invalid_argument("pgd: epsilon must be >= 0");
  if (steps < 1) throw std::invalid_argument("pgd: steps must be >= 1");
  const double alpha = step_size.value_or(epsilon / static_cast<double>(steps));
  std::array<double, 2> cur = x;
  for (int s = 0; s < steps; ++s) {
    auto g = vqc::loss_gradient_inputs(model, cur, label);
    for (std::size_t d = 0; d < 2; ++d) {
      cur[d] += alpha * sign_of(g[d]);
      cur[d] = std::clamp(cur[d], x[d] - epsilon, x[d] + epsilon);
    }
  }
  return cur;
}

// Uniform noise on the encoding angles; the classical feature record is
// untouched, the perturbation lives at the encoding layer.
inline std::array<double, 2> quantum_state_perturb(const std::array<double, 2>& x, double epsilon,
                                                   RngStream& rng) {
  if (epsilon < 0.0) throw std::invalid_argument("quantum_state_perturb: epsilon must be >= 0");
  return {x[0] + rng.uniform(-epsilon, epsilon), x[1] + rng.uniform(-epsilon, epsilon)};
}

inline std::array<double, 2> apply_attack(const VqcModel& model, const std::array<double, 2>& x,
                                          int label, const AttackSpec& spec, RngStream& rng) {
  switch (spec.kind) {
    case AttackKind::Fgsm: return fgsm(model, x, label, spec.epsilon);
    case AttackKind::Pgd: return pgd(model, x, label, spec.epsilon, spec.pgd_steps);
    case AttackKind::QuantumState: return quantum_state_perturb(x, spec.epsilon, rng);
  }
  throw std::logic_error("unreachable");
}

struct RobustnessRow {
  AttackKind attack;
  double epsilon = 0.0;
  double clean_accuracy = 0.0;
  double robust_accuracy = 0.0;
  double accuracy_drop = 0.0;
  double success_rate = 0.0;  // over initially-correct samples
};

struct RobustnessReport {
  std::vector<RobustnessRow> rows;
};

inline const std::vector<double>& default_epsilon_grid() {
  static const std::vector<double> grid{0.0, 0.05, 0.1, 0.15, 0.2, 0.3, 0.5};
  return grid;
}

inline RobustnessReport evaluate_robustness(const VqcModel& model,
                                            const std::vector<LabeledSample>& test_set,
                                            AttackKind attack, const std::vector<double>& epsilons,
                                            RngStream& rng) {
  if (test_set.empty()) throw std::invalid_argument("evaluate_robustness: empty test set");
  std::vector<bool> clean_correct(test_set.size());
  std::size_t clean_hits = 0;
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    clean_correct[i] = vqc::predict(model, test_set[i].x) == test_set[i].label;
    if (clean_correct[i]) ++clean_hits;
  }
  const double clean_acc = static_cast<double>(clean_hits) / static_cast<double>(test_set.size());

  RobustnessReport report;
  for (double eps : epsilons) {
    AttackSpec spec{attack, eps};
    std::size_t robust_hits = 0, fooled = 0;
    for (std::size_t i = 0; i < test_set.size(); ++i) {
      auto sample_rng =
          rng.derive(std::string(attack_name(attack)) + "/eps=" + csv::format_double(eps) +
                     "/sample/" + std::to_string(i));
      auto x_adv = apply_attack(model, test_set[i].x, test_set[i].label, spec, sample_rng);
      bool correct = vqc::predict(model, x_adv) == test_set[i].label;
      if (correct) ++robust_hits;
      if (clean_correct[i] && !correct) ++fooled;
    }
    RobustnessRow row;
    row.attack = attack;
    row.epsilon = eps;
    row.clean_accuracy = clean_acc;
    row.robust_accuracy = static_cast<double>(robust_hits) / static_cast<double>(test_set.size());
    row.accuracy_drop = row.clean_accuracy - row.robust_accuracy;
    row.success_rate =
        clean_hits > 0 ? static_cast<double>(fooled) / static_cast<double>(clean_hits) : 0.0;
    report.rows.push_back(row);
  }
  return report;
}

// Fraction of source-fooling adversarial examples that also fool the target.
// Absent when no example fooled the source.
inline std::optional<double> transfer_rate(const VqcModel& source, const VqcModel& target,
                                           const std::vector<LabeledSample>& clean,
                                           const std::vector<std::array<double, 2>>& adversarial) {
  if (clean.size() != adversarial.size()) {
    throw std::invalid_argument("transfer_rate: clean/adversarial size mismatch");
  }
  std::size_t fooling = 0, transferred = 0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    bool source_clean_ok = vqc::predict(source, clean[i].x) == clean[i].label;
    bool source_adv_ok = vqc::predict(source, adversarial[i]) == clean[i].label;
    if (source_clean_ok && !source_adv_ok) {
      ++fooling;
      if (vqc::predict(target, adversarial[i]) != clean[i].label) ++transferred;
    }
  }
  if (fooling == 0) return std::nullopt;
  return static_cast<double>(transferred) / static_cast<double>(fooling);
}

struct VulnerabilityResult {
  std::vector<double> scores;          // |<Z0>_adv - <Z0>_clean| under FGSM
  std::vector<std::size_t> top_k;      // most vulnerable sample indices
  std::vector<std::size_t> bottom_k;   // least vulnerable sample indices
};

inline VulnerabilityResult vulnerability_scores(const VqcModel& model,
                                                const std::vector<LabeledSample>& test_set,
                                                double epsilon = 0.2, std::size_t k = 5) {
  VulnerabilityResult res;
  res.scores.reserve(test_set.size());
  for (const auto& s : test_set) {
    double f_clean = vqc::decision_value(model, s.x);
    double f_adv = vqc::decision_value(model, fgsm(model, s.x, s.label, epsilon));
    res.scores.push_back(std::abs(f_adv - f_clean));
  }
  std::vector<std::size_t> order(res.scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return res.scores[a] > res.scores[b]; });
  k = std::min(k, order.size());
  res.top_k.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  res.bottom_k.assign(order.end() - static_cast<std::ptrdiff_t>(k), order.end());
  return res;
}

}  // namespace qtrust::adv
