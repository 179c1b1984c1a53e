#include "qtrust/uq.hpp"

#include <cmath>

#include "gtest/gtest.h"

using namespace qtrust;
using namespace qtrust::uq;

namespace {

qsim::ShotEstimate counts(std::int64_t c0, std::int64_t c1) {
  qsim::ShotEstimate e;
  e.counts = {c0, c1};
  e.shots = c0 + c1;
  return e;
}

}  // namespace

TEST(PredictiveEntropy, KnownValues) {
  EXPECT_DOUBLE_EQ(predictive_entropy(counts(100, 100)), 1.0);
  EXPECT_DOUBLE_EQ(predictive_entropy(counts(200, 0)), 0.0);
  double expected = -0.75 * std::log2(0.75) - 0.25 * std::log2(0.25);
  EXPECT_NEAR(predictive_entropy(counts(150, 50)), expected, 1e-12);
  EXPECT_NEAR(expected, 0.8113, 1e-4);
}

TEST(VariationRatio, KnownValues) {
  EXPECT_DOUBLE_EQ(variation_ratio(counts(200, 0)), 0.0);
  EXPECT_DOUBLE_EQ(variation_ratio(counts(100, 100)), 0.5);
  EXPECT_NEAR(variation_ratio(counts(180, 20)), 0.1, 1e-12);
}

TEST(ShotStd, KnownValues) {
  EXPECT_DOUBLE_EQ(shot_std(counts(100, 100)), 1.0);
  EXPECT_DOUBLE_EQ(shot_std(counts(0, 200)), 0.0);
  EXPECT_NEAR(shot_std(counts(10, 90)), 0.6, 1e-12);
}

TEST(EnsembleUq, SingleMemberHasZeroEpistemic) {
  RngStream rng(1);
  std::vector<vqc::VqcModel> members{vqc::VqcModel{}};
  auto res = ensemble_uq({0.3, 0.7}, members, 200, rng);
  EXPECT_NEAR(res.report.epistemic, 0.0, 1e-12);
  EXPECT_NEAR(res.report.entropy, res.report.aleatoric, 1e-12);
}

TEST(EnsembleUq, IdenticalDegenerateMembersAgree) {
  RngStream rng(2);
  std::vector<vqc::VqcModel> members(4, vqc::VqcModel{});  // all output outcome 0 at x = 0
  auto res = ensemble_uq({0.0, 0.0}, members, 100, rng);
  EXPECT_NEAR(res.report.epistemic, 0.0, 1e-9);
  EXPECT_EQ(res.outcome, 0);
  EXPECT_EQ(res.label, +1);
  EXPECT_DOUBLE_EQ(res.report.max_confidence, 1.0);
}

TEST(EnsembleUq, MaximalDisagreementSplitsEntropy) {
  // Member A outputs outcome 0 deterministically, member B outcome 1.
  vqc::VqcModel a;
  vqc::VqcModel b;
  b.params[1] = vqc::kPi;  // RY(pi) on q1 negates the entangled readout
  RngStream rng(3);
  auto res = ensemble_uq({0.0, 0.0}, {a, b}, 50, rng);
  EXPECT_NEAR(res.report.entropy, 1.0, 1e-12);
  EXPECT_NEAR(res.report.aleatoric, 0.0, 1e-12);
  EXPECT_NEAR(res.report.epistemic, 1.0, 1e-12);
  EXPECT_THROW(ensemble_uq({0.0, 0.0}, {}, 50, rng), std::invalid_argument);
}

TEST(EnsembleUq, AdditivityAndJensenOnRandomEnsembles) {
  RngStream rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    auto members = sample_ensemble(1 + static_cast<int>(rng.index(5)), 1.0, rng);
    std::array<double, 2> x{rng.uniform(-2, 2), rng.uniform(-2, 2)};
    auto sample_rng = rng.derive("trial/" + std::to_string(trial));
    auto res = ensemble_uq(x, members, 64, sample_rng);
    EXPECT_NEAR(res.report.entropy, res.report.aleatoric + res.report.epistemic, 1e-12);
    EXPECT_GE(res.report.epistemic, -1e-9);
    EXPECT_LE(res.report.entropy, 1.0 + 1e-12);
    EXPECT_NEAR(res.report.max_confidence, 1.0 - res.report.variation_ratio, 1e-12);
  }
}

TEST(DirichletInterval, UniformAndConcentratedPosteriors) {
  RngStream rng(5);
  auto flat = dirichlet_credible_interval({1.0, 1.0}, 0.95, rng);
  EXPECT_NEAR(flat[0].lo, 0.025, 0.01);
  EXPECT_NEAR(flat[0].hi, 0.975, 0.01);
  auto sharp = dirichlet_credible_interval({201.0, 1.0}, 0.95, rng);
  EXPECT_GT(sharp[0].lo, 0.97);
  for (const auto& ci : {flat[0], flat[1], sharp[0], sharp[1]}) {
    EXPECT_GE(ci.lo, 0.0);
    EXPECT_LE(ci.hi, 1.0);
    EXPECT_LT(ci.lo, ci.hi);
  }
  EXPECT_THROW(dirichlet_credible_interval({0.0, 1.0}, 0.95, rng), std::invalid_argument);
}

TEST(DirichletInterval, CoverageOfKnownProbability) {
  // 95% interval should contain the true p in at least 90% of simulated
  // 200-shot estimates (Monte-Carlo slack included).
  const double p_true = 0.3;
  RngStream rng(6);
  int covered = 0;
  const int sims = 500;
  for (int s = 0; s < sims; ++s) {
    auto est = qsim::sample_shots(1.0 - p_true, p_true, 200, rng);
    std::array<double, 2> alpha{static_cast<double>(est.counts[0]) + 1.0,
                                static_cast<double>(est.counts[1]) + 1.0};
    auto ci_rng = rng.derive("ci/" + std::to_string(s));
    auto ci = dirichlet_credible_interval(alpha, 0.95, ci_rng, 2000);
    if (ci[1].lo <= p_true && p_true <= ci[1].hi) ++covered;
  }
  EXPECT_GE(covered, static_cast<int>(0.90 * sims));
}

TEST(Calibration, PerfectPredictionsScoreZero) {
  std::vector<ConfidenceOutcome> preds(20, {1.0, true});
  auto rep = calibration(preds);
  EXPECT_DOUBLE_EQ(rep.ece, 0.0);
  EXPECT_DOUBLE_EQ(rep.mce, 0.0);
  EXPECT_DOUBLE_EQ(rep.brier, 0.0);
  EXPECT_THROW(calibration({}), std::invalid_argument);
}

TEST(Calibration, PerfectlyCalibratedBin) {
  std::vector<ConfidenceOutcome> preds;
  for (int i = 0; i < 10; ++i) preds.push_back({0.8, i < 8});
  auto rep = calibration(preds);
  EXPECT_NEAR(rep.ece, 0.0, 1e-12);
}

TEST(Calibration, TwoBinHandComputation) {
  std::vector<ConfidenceOutcome> preds;
  for (int i = 0; i < 10; ++i) preds.push_back({0.9, i < 5});  // conf .9, acc .5
  for (int i = 0; i < 10; ++i) preds.push_back({0.6, i < 6});  // conf .6, acc .6
  auto rep = calibration(preds);
  EXPECT_NEAR(rep.ece, 0.2, 1e-12);
  EXPECT_NEAR(rep.mce, 0.4, 1e-12);
  std::size_t total = 0;
  for (const auto& b : rep.bins) total += b.count;
  EXPECT_EQ(total, preds.size());
  EXPECT_GE(rep.mce, rep.ece);
}

TEST(Calibration, ZeroConfidenceGoesToFirstBin) {
  std::vector<ConfidenceOutcome> preds{{0.0, false}, {0.05, false}};
  auto rep = calibration(preds, 10);
  EXPECT_EQ(rep.bins[0].count, 2u);
}

TEST(TemperatureScale, RecoversUnitTemperatureOnCalibratedData) {
  // Labels generated from the logistic link at T = 1: the grid optimum should
  // land within one grid step of 1.0. Exhaustive grid evaluation is the
  // oracle here by construction.
  RngStream rng(7);
  std::vector<double> fs;
  std::vector<int> labels;
  for (int i = 0; i < 20000; ++i) {
    double f = rng.uniform(-1.0, 1.0);
    double p_pos = 1.0 / (1.0 + std::exp(-kLogisticScale * f));
    fs.push_back(f);
    labels.push_back(rng.uniform() < p_pos ? +1 : -1);
  }
  auto res = temperature_scale(fs, labels);
  double step = std::exp((std::log(20.0) - std::log(0.05)) / 60.0);
  EXPECT_GE(res.temperature, 1.0 / (step * step));
  EXPECT_LE(res.temperature, step * step);
  for (double c : res.confidences) {
    EXPECT_GT(c, 0.0);
    EXPECT_LT(c, 1.0);
  }
}

TEST(TemperatureScale, NeverWorseThanUnitTemperature) {
  RngStream rng(8);
  std::vector<double> fs;
  std::vector<int> labels;
  for (int i = 0; i < 500; ++i) {
    fs.push_back(rng.uniform(-1, 1));
    labels.push_back(rng.uniform() < 0.6 ? +1 : -1);
  }
  auto res = temperature_scale(fs, labels);
  auto make_preds = [&](double t) {
    std::vector<ConfidenceOutcome> preds;
    for (std::size_t i = 0; i < fs.size(); ++i) {
      preds.push_back({logistic_confidence(fs[i], t), vqc::sign_label(fs[i]) == labels[i]});
    }
    return preds;
  };
  EXPECT_LE(calibration(make_preds(res.temperature)).ece, calibration(make_preds(1.0)).ece + 1e-12);
  EXPECT_THROW(temperature_scale({}, {}), std::invalid_argument);
}

TEST(RiskCoverage, HandCasesAndMonotonicity) {
  std::vector<ConfidenceOutcome> preds{{0.9, true}, {0.6, false}};
  auto curve = risk_coverage_curve(preds, {0.0, 0.7, 0.95});
  EXPECT_DOUBLE_EQ(curve[0].coverage, 1.0);
  EXPECT_DOUBLE_EQ(curve[0].risk.value(), 0.5);
  EXPECT_DOUBLE_EQ(curve[1].coverage, 0.5);
  EXPECT_DOUBLE_EQ(curve[1].risk.value(), 0.0);
  EXPECT_DOUBLE_EQ(curve[2].coverage, 0.0);
  EXPECT_FALSE(curve[2].risk.has_value());

  RngStream rng(9);
  std::vector<ConfidenceOutcome> random_preds;
  for (int i = 0; i < 300; ++i) random_preds.push_back({rng.uniform(0.5, 1.0), rng.uniform() < 0.8});
  std::vector<double> grid;
  for (int i = 0; i <= 100; ++i) grid.push_back(i / 100.0);
  auto rc = risk_coverage_curve(random_preds, grid);
  for (std::size_t i = 1; i < rc.size(); ++i) EXPECT_LE(rc[i].coverage, rc[i - 1].coverage);
}

TEST(RiskCoverage, AllCorrectGivesZeroRisk) {
  std::vector<ConfidenceOutcome> preds(10, {0.7, true});
  for (const auto& pt : risk_coverage_curve(preds, {0.0, 0.5, 0.7})) {
    ASSERT_TRUE(pt.risk.has_value());
    EXPECT_DOUBLE_EQ(*pt.risk, 0.0);
  }
}

TEST(GroupStatistics, IdenticalGroupsScoreZero) {
  std::vector<double> g{0.1, 0.4, 0.7, 0.9};
  auto s = stats::group_statistics(g, g);
  EXPECT_DOUBLE_EQ(s.cohens_d, 0.0);
  EXPECT_DOUBLE_EQ(s.welch_t, 0.0);
  EXPECT_THROW(stats::group_statistics({1.0}, g), std::invalid_argument);
}

TEST(GroupStatistics, UnitEffectOnShiftedNormals) {
  RngStream rng(10);
  std::vector<double> a, b;
  for (int i = 0; i < 5000; ++i) {
    a.push_back(rng.normal(0.0, 1.0));
    b.push_back(rng.normal(1.0, 1.0));
  }
  auto s = stats::group_statistics(a, b);
  EXPECT_NEAR(s.cohens_d, 1.0, 0.1);
  EXPECT_GT(s.cohens_d, 0.0);  // incorrect-group mean above correct-group mean
  EXPECT_LT(s.p_value, 1e-6);
}

TEST(ShotVarianceScaling, LogLogSlopeNearMinusOne) {
  RngStream rng(11);
  const std::vector<double> shot_grid{10, 50, 100, 200, 500, 1000};
  std::vector<double> log_s, log_var;
  for (double s : shot_grid) {
    double sum = 0.0, sum_sq = 0.0;
    const int reps = 1000;
    for (int r = 0; r < reps; ++r) {
      auto est = qsim::sample_shots(0.6, 0.4, static_cast<std::int64_t>(s), rng);
      double p = est.p_hat(1);
      sum += p;
      sum_sq += p * p;
    }
    double mean = sum / reps;
    log_s.push_back(std::log(s));
    log_var.push_back(std::log(sum_sq / reps - mean * mean));
  }
  EXPECT_NEAR(stats::regression_slope(log_s, log_var), -1.0, 0.15);
}
