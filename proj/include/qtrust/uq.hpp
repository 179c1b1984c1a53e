#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qtrust/qsim.hpp"
#include "qtrust/rng.hpp"
#include "qtrust/stats.hpp"
#include "qtrust/vqc.hpp"

namespace qtrust::uq {

using qsim::ShotEstimate;

// Entropies are base-2 so the binary maximum is 1.0.
inline double entropy_bits(double p0, double p1) {
  double h = 0.0;
  for (double p : {p0, p1}) {
    if (p > 0.0) h -= p * std::log2(p);
  }
  return h;
}

inline double predictive_entropy(const ShotEstimate& est) {
  if (est.shots < 1) throw std::invalid_argument("predictive_entropy: shots must be >= 1");
  return entropy_bits(est.p_hat(0), est.p_hat(1));
}

// 1 minus the modal outcome frequency.
inline double variation_ratio(const ShotEstimate& est) {
  if (est.shots < 1) throw std::invalid_argument("variation_ratio: shots must be >= 1");
  double max_p = std::max(est.p_hat(0), est.p_hat(1));
  return 1.0 - max_p;
}

// Standard deviation of the +/-1-valued readout: 2*sqrt(p(1-p)).
inline double shot_std(const ShotEstimate& est) {
  if (est.shots < 1) throw std::invalid_argument("shot_std: shots must be >= 1");
  double p = est.p_hat(1);
  return 2.0 * std::sqrt(std::max(0.0, p * (1.0 - p)));
}

struct CredibleInterval {
  double lo = 0.0;
  double hi = 1.0;
};

// Central credible interval of the Beta marginal of Dir(alpha), estimated by
// seeded Monte Carlo quantiles.
inline std::array<CredibleInterval, 2> dirichlet_credible_interval(
    const std::array<double, 2>& alpha, double level, RngStream& rng, int n_draws = 10000) {
  if (alpha[0] <= 0.0 || alpha[1] <= 0.0) {
    throw std::invalid_argument("dirichlet_credible_interval: alpha must be positive");
  }
  if (level <= 0.0 || level >= 1.0) {
    throw std::invalid_argument("dirichlet_credible_interval: level must be in (0, 1)");
  }
  std::gamma_distribution<double> g0(alpha[0], 1.0), g1(alpha[1], 1.0);
  std::vector<double> p0_draws(static_cast<std::size_t>(n_draws));
  for (auto& v : p0_draws) {
    double x0 = g0(rng.engine());
    double x1 = g1(rng.engine());
    v = x0 / (x0 + x1);
  }
  std::sort(p0_draws.begin(), p0_draws.end());
  auto quantile = [&](double q) {
    std::size_t i = static_cast<std::size_t>(q * (static_cast<double>(p0_draws.size()) - 1.0));
    return p0_draws[i];
  };
  double tail = (1.0 - level) / 2.0;
  CredibleInterval ci0{quantile(tail), quantile(1.0 - tail)};
  CredibleInterval ci1{1.0 - ci0.hi, 1.0 - ci0.lo};
  return {ci0, ci1};
}

struct UncertaintyReport {
  double entropy = 0.0;          // H of the ensemble-averaged distribution
  double aleatoric = 0.0;        // mean per-member entropy
  double epistemic = 0.0;        // H - aleatoric (mutual information)
  double variation_ratio = 0.0;  // from pooled counts
  double shot_std = 0.0;         // from pooled counts
  double max_confidence = 0.0;   // max pooled class probability
  std::array<CredibleInterval, 2> credible_interval{};
};

struct EnsembleResult {
  int outcome = 0;     // argmax of the pooled outcome distribution, in {0, 1}
  int label = +1;      // outcome 0 -> +1, outcome 1 -> -1 (readout sign)
  UncertaintyReport report;
};

enum class DirichletPrior { Flat, Jeffreys };

inline double prior_count(DirichletPrior prior) {
  return prior == DirichletPrior::Flat ? 1.0 : 0.5;
}

// Ensemble-based uncertainty decomposition: each member contributes a
// shot-sampled outcome distribution; the pooled counts drive prediction,
// confidence, and the Dirichlet posterior.
inline EnsembleResult ensemble_uq(const std::array<double, 2>& x,
                                  const std::vector<vqc::VqcModel>& members, std::int64_t shots,
                                  RngStream& rng, DirichletPrior prior = DirichletPrior::Flat) {
  if (members.empty()) throw std::invalid_argument("ensemble_uq: ensemble must be non-empty");
  if (shots < 1) throw std::invalid_argument("ensemble_uq: shots must be >= 1");

  std::array<std::int64_t, 2> pooled{0, 0};
  double aleatoric = 0.0;
  for (std::size_t m = 0; m < members.size(); ++m) {
    auto member_rng = rng.derive("member/" + std::to_string(m));
    auto est = vqc::measure_shots(members[m], x, shots, member_rng);
    pooled[0] += est.counts[0];
    pooled[1] += est.counts[1];
    aleatoric += predictive_entropy(est);
  }
  aleatoric /= static_cast<double>(members.size());

  const double total = static_cast<double>(pooled[0] + pooled[1]);
  const double p0 = static_cast<double>(pooled[0]) / total;
  const double p1 = static_cast<double>(pooled[1]) / total;

  EnsembleResult res;
  res.outcome = p1 > p0 ? 1 : 0;
  res.label = res.outcome == 0 ? +1 : -1;
  res.report.entropy = entropy_bits(p0, p1);
  res.report.aleatoric = aleatoric;
  res.report.epistemic = res.report.entropy - aleatoric;
  res.report.variation_ratio = 1.0 - std::max(p0, p1);
  res.report.shot_std = 2.0 * std::sqrt(std::max(0.0, p1 * (1.0 - p1)));
  res.report.max_confidence = std::max(p0, p1);

  const double prior_c = prior_count(prior);
  std::array<double, 2> alpha{static_cast<double>(pooled[0]) + prior_c,
                              static_cast<double>(pooled[1]) + prior_c};
  auto ci_rng = rng.derive("credible");
  res.report.credible_interval = dirichlet_credible_interval(alpha, 0.95, ci_rng);
  return res;
}

// Ensemble construction: independently trained members (the experimental
// mode), or fresh initializations without training (the literal sampled-
// parameter procedure).
inline std::vector<vqc::VqcModel> train_ensemble(const std::vector<data::LabeledSample>& train_set,
                                                 int ensemble_size, const vqc::TrainConfig& cfg,
                                                 RngStream& rng) {
  if (ensemble_size < 1) throw std::invalid_argument("train_ensemble: size must be >= 1");
  std::vector<vqc::VqcModel> members;
  members.reserve(static_cast<std::size_t>(ensemble_size));
  for (int m = 0; m < ensemble_size; ++m) {
    auto member_rng = rng.derive("train/" + std::to_string(m));
    members.push_back(vqc::train(train_set, cfg, member_rng).model);
  }
  return members;
}

inline std::vector<vqc::VqcModel> sample_ensemble(int ensemble_size, double init_std,
                                                  RngStream& rng) {
  if (ensemble_size < 1) throw std::invalid_argument("sample_ensemble: size must be >= 1");
  std::vector<vqc::VqcModel> members;
  members.reserve(static_cast<std::size_t>(ensemble_size));
  for (int m = 0; m < ensemble_size; ++m) {
    auto member_rng = rng.derive("init/" + std::to_string(m));
    members.push_back(vqc::init_model(init_std, member_rng));
  }
  return members;
}

struct ReliabilityBin {
  double range_lo = 0.0;
  double range_hi = 0.0;
  double mean_confidence = 0.0;
  double accuracy = 0.0;
  std::size_t count = 0;
};

struct CalibrationReport {
  double ece = 0.0;
  double mce = 0.0;
  double brier = 0.0;
  std::vector<ReliabilityBin> bins;
};

struct ConfidenceOutcome {
  double confidence = 0.0;  // max-class probability
  bool correct = false;
};

// Equal-width right-closed bins on [0, 1]; confidence exactly 0 falls in the
// first bin.
inline CalibrationReport calibration(const std::vector<ConfidenceOutcome>& predictions, int n_bins = 10) {
  if (predictions.empty()) throw std::invalid_argument("calibration: empty input");
  if (n_bins < 1) throw std::invalid_argument("calibration: bins must be >= 1");

  CalibrationReport rep;
  rep.bins.resize(static_cast<std::size_t>(n_bins));
  const double width = 1.0 / static_cast<double>(n_bins);
  for (int b = 0; b < n_bins; ++b) {
    rep.bins[static_cast<std::size_t>(b)].range_lo = b * width;
    rep.bins[static_cast<std::size_t>(b)].range_hi = (b + 1) * width;
  }

  std::vector<double> conf_sum(static_cast<std::size_t>(n_bins), 0.0);
  std::vector<double> correct_sum(static_cast<std::size_t>(n_bins), 0.0);
  for (const auto& p : predictions) {
    int b = static_cast<int>(std::ceil(p.confidence * n_bins)) - 1;
    b = std::clamp(b, 0, n_bins - 1);
    auto bi = static_cast<std::size_t>(b);
    ++rep.bins[bi].count;
    conf_sum[bi] += p.confidence;
    correct_sum[bi] += p.correct ? 1.0 : 0.0;
    rep.brier += p.correct ? (1.0 - p.confidence) * (1.0 - p.confidence)
                           : p.confidence * p.confidence;
  }
  rep.brier /= static_cast<double>(predictions.size());

  const double n = static_cast<double>(predictions.size());
  for (std::size_t b = 0; b < rep.bins.size(); ++b) {
    if (rep.bins[b].count == 0) continue;
    double cnt = static_cast<double>(rep.bins[b].count);
    rep.bins[b].mean_confidence = conf_sum[b] / cnt;
    rep.bins[b].accuracy = correct_sum[b] / cnt;
    double gap = std::abs(rep.bins[b].accuracy - rep.bins[b].mean_confidence);
    rep.ece += (cnt / n) * gap;
    rep.mce = std::max(rep.mce, gap);
  }
  return rep;
}

inline constexpr double kLogisticScale = 3.0;  // link slope for [-1,1] decision values

inline double logistic_confidence(double decision_value, double temperature) {
  double p = 1.0 / (1.0 + std::exp(-kLogisticScale * decision_value / temperature));
  return std::max(p, 1.0 - p);
}

struct TemperatureResult {
  double temperature = 1.0;
  std::vector<double> confidences;  // rescaled max-class confidences
};

// Grid search for the temperature minimizing validation ECE; the decision
// value feeds a fixed logistic link since the model has no logits.
inline TemperatureResult temperature_scale(const std::vector<double>& decision_values,
                                           const std::vector<int>& labels, int n_bins = 10,
                                           int grid_size = 61) {
  if (decision_values.empty() || decision_values.size() != labels.size()) {
    throw std::invalid_argument("temperature_scale: empty or mismatched validation set");
  }
  const double lo = std::log(0.05), hi = std::log(20.0);
  double best_t = 1.0, best_ece = std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid_size; ++i) {
    double t = std::exp(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(grid_size - 1));
    std::vector<ConfidenceOutcome> preds;
    preds.reserve(decision_values.size());
    for (std::size_t k = 0; k < decision_values.size(); ++k) {
      preds.push_back({logistic_confidence(decision_values[k], t),
                       vqc::sign_label(decision_values[k]) == labels[k]});
    }
    double ece = calibration(preds, n_bins).ece;
    if (ece < best_ece - 1e-15) {
      best_ece = ece;
      best_t = t;
    }
  }
  TemperatureResult res;
  res.temperature = best_t;
  res.confidences.reserve(decision_values.size());
  for (double f : decision_values) res.confidences.push_back(logistic_confidence(f, best_t));
  return res;
}

struct RiskCoveragePoint {
  double threshold = 0.0;
  double coverage = 0.0;
  std::optional<double> risk;  // absent when nothing is retained
};

inline std::vector<RiskCoveragePoint> risk_coverage_curve(
    const std::vector<ConfidenceOutcome>& predictions, const std::vector<double>& thresholds) {
  if (predictions.empty()) throw std::invalid_argument("risk_coverage_curve: empty input");
  std::vector<RiskCoveragePoint> curve;
  curve.reserve(thresholds.size());
  for (double tau : thresholds) {
    std::size_t retained = 0, errors = 0;
    for (const auto& p : predictions) {
      if (p.confidence >= tau) {
        ++retained;
        if (!p.correct) ++errors;
      }
    }
    RiskCoveragePoint pt;
    pt.threshold = tau;
    pt.coverage = static_cast<double>(retained) / static_cast<double>(predictions.size());
    if (retained > 0) pt.risk = static_cast<double>(errors) / static_cast<double>(retained);
    curve.push_back(pt);
  }
  return curve;
}

}  // namespace qtrust::uq
