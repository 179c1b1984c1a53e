#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "qtrust/adv.hpp"
#include "qtrust/csv.hpp"
#include "qtrust/data.hpp"
#include "qtrust/fed.hpp"
#include "qtrust/qsim.hpp"
#include "qtrust/rng.hpp"
#include "qtrust/stats.hpp"
#include "qtrust/uq.hpp"
#include "qtrust/vqc.hpp"

namespace qtrust::experiments {

using nlohmann::json;

inline constexpr const char* kVersion = "1.0.0";

// Raised for malformed or invalid configurations; the CLI maps it to exit 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void check_keys(const json& j, const std::vector<std::string>& allowed,
                       const std::string& context) {
  if (!j.is_object()) throw ConfigError("config: " + context + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      throw ConfigError("config: unknown key \"" + it.key() + "\" in " + context);
    }
  }
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

struct DataConfig {
  int n_samples = 1500;
  double noise_std = 0.2;
  double train_fraction = 0.6;
};

struct TrainBlock {
  int iterations = 50;
  double init_std = 0.1;
  std::int64_t eval_shots = 200;
  vqc::SpsaConfig spsa;
  std::optional<double> adversarial_epsilon;  // present => adversarial training
};

struct UqBlock {
  int ensemble_size = 5;
  std::int64_t shots = 200;
  std::string prior = "flat";  // or "jeffreys"
  int calibration_bins = 10;
};

struct ShotsBlock {
  std::vector<std::int64_t> shot_counts{10, 50, 100, 200, 500, 1000};
  int repetitions = 1000;
  double probe_p1 = 0.5;  // Born probability of the sampled outcome
};

struct AttackBlock {
  std::vector<std::string> attacks{"fgsm", "pgd", "quantum_state"};
  std::vector<double> epsilons = adv::default_epsilon_grid();
  int pgd_steps = 10;
  double examples_epsilon = 0.2;       // budget for adversarial_examples.csv
  double vulnerability_epsilon = 0.2;  // budget for vulnerability.csv
  int vulnerability_k = 5;
};

struct DefendBlock {
  double epsilon = 0.15;  // adversarial-training budget
  std::vector<double> eval_epsilons{0.15, 0.2, 0.25};
};

struct FederatedBlock {
  int n_clients = 4;
  int rounds = 20;
  int local_iterations = 3;
  std::string partition = "iid";  // iid | label_skew | quantity_skew
  double concentration = 0.5;
  std::optional<double> dp_epsilon_per_round;  // present => DP enabled
  double dp_delta = 1e-5;
  double dp_clip_norm = 1.0;
  int mia_shadows = 4;
  int mia_samples = 200;  // member/non-member population size
};

struct ExperimentConfig {
  std::string experiment;  // train | uq | shots-study | attack | defend | federated
  std::uint64_t seed = 1;
  int replicates = 1;
  DataConfig data;
  TrainBlock train;
  UqBlock uq;
  ShotsBlock shots_study;
  AttackBlock attack;
  DefendBlock defend;
  FederatedBlock federated;
};

inline adv::AttackKind attack_kind_from_name(const std::string& name) {
  if (name == "fgsm") return adv::AttackKind::Fgsm;
  if (name == "pgd") return adv::AttackKind::Pgd;
  if (name == "quantum_state") return adv::AttackKind::QuantumState;
  throw ConfigError("config: unknown attack \"" + name + "\"");
}

inline ExperimentConfig parse_config(const json& j) {
  detail::check_keys(j, {"experiment", "seed", "replicates", "data", "train", "uq", "shots_study",
                         "attack", "defend", "federated"},
                     "top level");
  ExperimentConfig cfg;
  if (!j.contains("experiment")) throw ConfigError("config: missing \"experiment\"");
  cfg.experiment = j.at("experiment").get<std::string>();
  const std::vector<std::string> known{"train", "uq", "shots-study", "attack", "defend",
                                       "federated"};
  if (std::find(known.begin(), known.end(), cfg.experiment) == known.end()) {
    throw ConfigError("config: unknown experiment \"" + cfg.experiment + "\"");
  }
  detail::read_field(j, "seed", cfg.seed);
  detail::read_field(j, "replicates", cfg.replicates);
  if (cfg.replicates < 1) throw ConfigError("config: replicates must be >= 1");

  if (j.contains("data")) {
    const auto& d = j.at("data");
    detail::check_keys(d, {"n_samples", "noise_std", "train_fraction"}, "data");
    detail::read_field(d, "n_samples", cfg.data.n_samples);
    detail::read_field(d, "noise_std", cfg.data.noise_std);
    detail::read_field(d, "train_fraction", cfg.data.train_fraction);
    if (cfg.data.n_samples < 2) throw ConfigError("config: data.n_samples must be >= 2");
    if (cfg.data.train_fraction <= 0.0 || cfg.data.train_fraction >= 1.0) {
      throw ConfigError("config: data.train_fraction must be in (0, 1)");
    }
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    detail::check_keys(t, {"iterations", "init_std", "eval_shots", "spsa", "adversarial_epsilon"},
                       "train");
    detail::read_field(t, "iterations", cfg.train.iterations);
    detail::read_field(t, "init_std", cfg.train.init_std);
    detail::read_field(t, "eval_shots", cfg.train.eval_shots);
    if (t.contains("adversarial_epsilon")) {
      cfg.train.adversarial_epsilon = t.at("adversarial_epsilon").get<double>();
    }
    if (t.contains("spsa")) {
      const auto& s = t.at("spsa");
      detail::check_keys(s, {"a", "c", "A", "alpha", "gamma"}, "train.spsa");
      detail::read_field(s, "a", cfg.train.spsa.a);
      detail::read_field(s, "c", cfg.train.spsa.c);
      detail::read_field(s, "A", cfg.train.spsa.A);
      detail::read_field(s, "alpha", cfg.train.spsa.alpha);
      detail::read_field(s, "gamma", cfg.train.spsa.gamma);
    }
    if (cfg.train.iterations < 0) throw ConfigError("config: train.iterations must be >= 0");
    if (cfg.train.eval_shots < 1) throw ConfigError("config: train.eval_shots must be >= 1");
  }
  if (j.contains("uq")) {
    const auto& u = j.at("uq");
    detail::check_keys(u, {"ensemble_size", "shots", "prior", "calibration_bins"}, "uq");
    detail::read_field(u, "ensemble_size", cfg.uq.ensemble_size);
    detail::read_field(u, "shots", cfg.uq.shots);
    detail::read_field(u, "prior", cfg.uq.prior);
    detail::read_field(u, "calibration_bins", cfg.uq.calibration_bins);
    if (cfg.uq.prior != "flat" && cfg.uq.prior != "jeffreys") {
      throw ConfigError("config: uq.prior must be \"flat\" or \"jeffreys\"");
    }
    if (cfg.uq.ensemble_size < 1) throw ConfigError("config: uq.ensemble_size must be >= 1");
  }
  if (j.contains("shots_study")) {
    const auto& s = j.at("shots_study");
    detail::check_keys(s, {"shot_counts", "repetitions", "probe_p1"}, "shots_study");
    detail::read_field(s, "shot_counts", cfg.shots_study.shot_counts);
    detail::read_field(s, "repetitions", cfg.shots_study.repetitions);
    detail::read_field(s, "probe_p1", cfg.shots_study.probe_p1);
    if (cfg.shots_study.shot_counts.size() < 2) {
      throw ConfigError("config: shots_study.shot_counts needs >= 2 entries");
    }
    if (cfg.shots_study.probe_p1 <= 0.0 || cfg.shots_study.probe_p1 >= 1.0) {
      throw ConfigError("config: shots_study.probe_p1 must be in (0, 1)");
    }
  }
  if (j.contains("attack")) {
    const auto& a = j.at("attack");
    detail::check_keys(a, {"attacks", "epsilons", "pgd_steps", "examples_epsilon",
                           "vulnerability_epsilon", "vulnerability_k"},
                       "attack");
    detail::read_field(a, "attacks", cfg.attack.attacks);
    detail::read_field(a, "epsilons", cfg.attack.epsilons);
    detail::read_field(a, "pgd_steps", cfg.attack.pgd_steps);
    detail::read_field(a, "examples_epsilon", cfg.attack.examples_epsilon);
    detail::read_field(a, "vulnerability_epsilon", cfg.attack.vulnerability_epsilon);
    detail::read_field(a, "vulnerability_k", cfg.attack.vulnerability_k);
    for (const auto& name : cfg.attack.attacks) attack_kind_from_name(name);
    if (cfg.attack.attacks.empty() || cfg.attack.epsilons.empty()) {
      throw ConfigError("config: attack.attacks and attack.epsilons must be non-empty");
    }
  }
  if (j.contains("defend")) {
    const auto& d = j.at("defend");
    detail::check_keys(d, {"epsilon", "eval_epsilons"}, "defend");
    detail::read_field(d, "epsilon", cfg.defend.epsilon);
    detail::read_field(d, "eval_epsilons", cfg.defend.eval_epsilons);
  }
  if (j.contains("federated")) {
    const auto& f = j.at("federated");
    detail::check_keys(f, {"n_clients", "rounds", "local_iterations", "partition", "concentration",
                           "dp_epsilon_per_round", "dp_delta", "dp_clip_norm", "mia_shadows",
                           "mia_samples"},
                       "federated");
    detail::read_field(f, "n_clients", cfg.federated.n_clients);
    detail::read_field(f, "rounds", cfg.federated.rounds);
    detail::read_field(f, "local_iterations", cfg.federated.local_iterations);
    detail::read_field(f, "partition", cfg.federated.partition);
    detail::read_field(f, "concentration", cfg.federated.concentration);
    if (f.contains("dp_epsilon_per_round")) {
      cfg.federated.dp_epsilon_per_round = f.at("dp_epsilon_per_round").get<double>();
    }
    detail::read_field(f, "dp_delta", cfg.federated.dp_delta);
    detail::read_field(f, "dp_clip_norm", cfg.federated.dp_clip_norm);
    detail::read_field(f, "mia_shadows", cfg.federated.mia_shadows);
    detail::read_field(f, "mia_samples", cfg.federated.mia_samples);
    if (cfg.federated.partition != "iid" && cfg.federated.partition != "label_skew" &&
        cfg.federated.partition != "quantity_skew") {
      throw ConfigError("config: federated.partition must be iid, label_skew, or quantity_skew");
    }
    if (cfg.federated.n_clients < 1 || cfg.federated.rounds < 0) {
      throw ConfigError("config: federated.n_clients must be >= 1 and rounds >= 0");
    }
  }
  return cfg;
}

inline ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: JSON parse error: ") + e.what());
  }
  return parse_config(j);
}

// Fully resolved echo: every default materialized.
inline json to_json(const ExperimentConfig& cfg) {
  json j;
  j["experiment"] = cfg.experiment;
  j["seed"] = cfg.seed;
  j["replicates"] = cfg.replicates;
  j["data"] = {{"n_samples", cfg.data.n_samples},
               {"noise_std", cfg.data.noise_std},
               {"train_fraction", cfg.data.train_fraction}};
  j["train"] = {{"iterations", cfg.train.iterations},
                {"init_std", cfg.train.init_std},
                {"eval_shots", cfg.train.eval_shots},
                {"spsa",
                 {{"a", cfg.train.spsa.a},
                  {"c", cfg.train.spsa.c},
                  {"A", cfg.train.spsa.A},
                  {"alpha", cfg.train.spsa.alpha},
                  {"gamma", cfg.train.spsa.gamma}}}};
  if (cfg.train.adversarial_epsilon) {
    j["train"]["adversarial_epsilon"] = *cfg.train.adversarial_epsilon;
  }
  j["uq"] = {{"ensemble_size", cfg.uq.ensemble_size},
             {"shots", cfg.uq.shots},
             {"prior", cfg.uq.prior},
             {"calibration_bins", cfg.uq.calibration_bins}};
  j["shots_study"] = {{"shot_counts", cfg.shots_study.shot_counts},
                      {"repetitions", cfg.shots_study.repetitions},
                      {"probe_p1", cfg.shots_study.probe_p1}};
  j["attack"] = {{"attacks", cfg.attack.attacks},
                 {"epsilons", cfg.attack.epsilons},
                 {"pgd_steps", cfg.attack.pgd_steps},
                 {"examples_epsilon", cfg.attack.examples_epsilon},
                 {"vulnerability_epsilon", cfg.attack.vulnerability_epsilon},
                 {"vulnerability_k", cfg.attack.vulnerability_k}};
  j["defend"] = {{"epsilon", cfg.defend.epsilon}, {"eval_epsilons", cfg.defend.eval_epsilons}};
  j["federated"] = {{"n_clients", cfg.federated.n_clients},
                    {"rounds", cfg.federated.rounds},
                    {"local_iterations", cfg.federated.local_iterations},
                    {"partition", cfg.federated.partition},
                    {"concentration", cfg.federated.concentration},
                    {"dp_delta", cfg.federated.dp_delta},
                    {"dp_clip_norm", cfg.federated.dp_clip_norm},
                    {"mia_shadows", cfg.federated.mia_shadows},
                    {"mia_samples", cfg.federated.mia_samples}};
  if (cfg.federated.dp_epsilon_per_round) {
    j["federated"]["dp_epsilon_per_round"] = *cfg.federated.dp_epsilon_per_round;
  }
  return j;
}

// Ordered metric map: insertion-stable output is not needed because JSON
// objects serialize with sorted keys, which keeps summaries deterministic.
using Metrics = std::map<std::string, double>;

namespace detail {

struct Prepared {
  std::vector<data::LabeledSample> train;
  std::vector<data::LabeledSample> test;
};

// Standardization statistics are fit on the training split only.
inline Prepared prepare_data(const DataConfig& cfg, std::uint64_t master_seed) {
  auto data_rng = RngStream::derive(master_seed, "data");
  auto ds = data::make_two_moons(cfg.n_samples, cfg.noise_std, data_rng);
  auto split_rng = RngStream::derive(master_seed, "split");
  auto [train_set, test_set] = data::split(ds, cfg.train_fraction, split_rng);
  auto st = data::fit_standardization(train_set);
  Prepared out;
  out.train = data::apply_standardization(train_set, st).samples;
  out.test = data::apply_standardization(test_set, st).samples;
  return out;
}

inline vqc::TrainConfig train_config_of(const TrainBlock& block) {
  vqc::TrainConfig tc;
  tc.iterations = block.iterations;
  tc.init_std = block.init_std;
  tc.spsa = block.spsa;
  if (block.adversarial_epsilon) {
    tc.adversarial = vqc::AdversarialTrainConfig{*block.adversarial_epsilon};
  }
  return tc;
}

inline double shot_accuracy(const vqc::VqcModel& model,
                            const std::vector<data::LabeledSample>& set, std::int64_t shots,
                            RngStream& rng) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    auto sample_rng = rng.derive("sample/" + std::to_string(i));
    double f = vqc::decision_value_shots(model, set[i].x, shots, sample_rng);
    if (vqc::sign_label(f) == set[i].label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(set.size());
}

inline void write_json_file(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << j.dump(2) << '\n';
}

inline std::string fmt(double v) { return csv::format_double(v); }

// ---- per-experiment replicate bodies -------------------------------------

inline Metrics run_train(const ExperimentConfig& cfg, std::uint64_t master_seed,
                         const std::filesystem::path& dir) {
  auto prep = prepare_data(cfg.data, master_seed);
  auto train_rng = RngStream::derive(master_seed, "train");
  auto result = vqc::train(prep.train, train_config_of(cfg.train), train_rng);

  write_json_file(vqc::to_json(result.model), dir / "model.json");
  csv::Writer losses((dir / "loss_history.csv").string());
  losses.row({"iteration", "loss"});
  for (std::size_t i = 0; i < result.loss_history.size(); ++i) {
    losses.row({std::to_string(i), fmt(result.loss_history[i])});
  }

  auto eval_rng = RngStream::derive(master_seed, "eval");
  Metrics m;
  m["final_train_loss"] = vqc::squared_hinge_loss(result.model, prep.train);
  m["test_accuracy"] = shot_accuracy(result.model, prep.test, cfg.train.eval_shots, eval_rng);
  m["test_accuracy_exact"] = vqc::accuracy(result.model, prep.test);
  return m;
}

inline Metrics run_uq(const ExperimentConfig& cfg, std::uint64_t master_seed,
                      const std::filesystem::path& dir) {
  auto prep = prepare_data(cfg.data, master_seed);
  auto ens_rng = RngStream::derive(master_seed, "ensemble");
  auto members =
      uq::train_ensemble(prep.train, cfg.uq.ensemble_size, train_config_of(cfg.train), ens_rng);
  auto prior = cfg.uq.prior == "flat" ? uq::DirichletPrior::Flat : uq::DirichletPrior::Jeffreys;

  csv::Writer per_sample((dir / "uncertainty_per_sample.csv").string());
  per_sample.row({"sample_id", "x0", "x1", "label", "prediction", "correct", "entropy",
                  "aleatoric", "epistemic", "variation_ratio", "shot_std", "max_confidence",
                  "ci_lo", "ci_hi"});

  std::vector<double> entropy_correct, entropy_wrong, vr_correct, vr_wrong, conf_correct,
      conf_wrong;
  std::vector<uq::ConfidenceOutcome> outcomes;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < prep.test.size(); ++i) {
    auto sample_rng = RngStream::derive(master_seed, "uq/sample/" + std::to_string(i));
    auto res = uq::ensemble_uq(prep.test[i].x, members, cfg.uq.shots, sample_rng, prior);
    bool correct = res.label == prep.test[i].label;
    if (correct) ++hits;
    const auto& rep = res.report;
    auto ci = rep.credible_interval[static_cast<std::size_t>(res.outcome)];
    per_sample.row({std::to_string(i), fmt(prep.test[i].x[0]), fmt(prep.test[i].x[1]),
                    std::to_string(prep.test[i].label), std::to_string(res.label),
                    correct ? "1" : "0", fmt(rep.entropy), fmt(rep.aleatoric), fmt(rep.epistemic),
                    fmt(rep.variation_ratio), fmt(rep.shot_std), fmt(rep.max_confidence),
                    fmt(ci.lo), fmt(ci.hi)});
    (correct ? entropy_correct : entropy_wrong).push_back(rep.entropy);
    (correct ? vr_correct : vr_wrong).push_back(rep.variation_ratio);
    (correct ? conf_correct : conf_wrong).push_back(rep.max_confidence);
    outcomes.push_back({rep.max_confidence, correct});
  }

  auto cal = uq::calibration(outcomes, cfg.uq.calibration_bins);
  csv::Writer bins((dir / "calibration.csv").string());
  bins.row({"bin_lo", "bin_hi", "mean_confidence", "accuracy", "count"});
  for (const auto& b : cal.bins) {
    bins.row({fmt(b.range_lo), fmt(b.range_hi), fmt(b.mean_confidence), fmt(b.accuracy),
              std::to_string(b.count)});
  }

  // Temperature scaling on the ensemble-averaged exact decision values.
  std::vector<double> decisions;
  std::vector<int> labels;
  for (const auto& s : prep.test) {
    double f = 0.0;
    for (const auto& member : members) f += vqc::decision_value(member, s.x);
    decisions.push_back(f / static_cast<double>(members.size()));
    labels.push_back(s.label);
  }
  auto temp = uq::temperature_scale(decisions, labels, cfg.uq.calibration_bins);

  Metrics m;
  m["accuracy"] = static_cast<double>(hits) / static_cast<double>(prep.test.size());
  m["ece"] = cal.ece;
  m["mce"] = cal.mce;
  m["brier"] = cal.brier;
  m["temperature"] = temp.temperature;
  if (!entropy_wrong.empty() && entropy_correct.size() >= 2 && entropy_wrong.size() >= 2) {
    auto ent = stats::group_statistics(entropy_correct, entropy_wrong);
    auto vr = stats::group_statistics(vr_correct, vr_wrong);
    auto conf = stats::group_statistics(conf_correct, conf_wrong);
    m["entropy_cohen_d"] = ent.cohens_d;
    m["entropy_welch_p"] = ent.p_value;
    m["variation_ratio_cohen_d"] = vr.cohens_d;
    m["max_confidence_cohen_d"] = conf.cohens_d;
    m["mean_entropy_correct"] = stats::mean(entropy_correct);
    m["mean_entropy_incorrect"] = stats::mean(entropy_wrong);
  }
  return m;
}

inline Metrics run_shots_study(const ExperimentConfig& cfg, std::uint64_t master_seed,
                               const std::filesystem::path& dir) {
  const auto& block = cfg.shots_study;
  csv::Writer out((dir / "shot_variance.csv").string());
  out.row({"shots", "variance", "repetitions"});
  std::vector<double> log_s, log_var;
  for (std::int64_t shots : block.shot_counts) {
    double sum = 0.0, sum_sq = 0.0;
    for (int r = 0; r < block.repetitions; ++r) {
      auto rng = RngStream::derive(
          master_seed, "shots/" + std::to_string(shots) + "/rep/" + std::to_string(r));
      auto est = qsim::sample_shots(1.0 - block.probe_p1, block.probe_p1, shots, rng);
      double p = est.p_hat(1);
      sum += p;
      sum_sq += p * p;
    }
    const double n = static_cast<double>(block.repetitions);
    double variance = sum_sq / n - (sum / n) * (sum / n);
    out.row({std::to_string(shots), fmt(variance), std::to_string(block.repetitions)});
    log_s.push_back(std::log(static_cast<double>(shots)));
    log_var.push_back(std::log(std::max(variance, 1e-300)));
  }
  Metrics m;
  m["loglog_slope"] = stats::regression_slope(log_s, log_var);
  return m;
}

inline Metrics run_attack(const ExperimentConfig& cfg, std::uint64_t master_seed,
                          const std::filesystem::path& dir) {
  auto prep = prepare_data(cfg.data, master_seed);
  auto train_rng = RngStream::derive(master_seed, "train");
  auto model = vqc::train(prep.train, train_config_of(cfg.train), train_rng).model;
  write_json_file(vqc::to_json(model), dir / "model.json");

  Metrics m;
  csv::Writer curve((dir / "robustness_curve.csv").string());
  curve.row({"attack", "epsilon", "clean_acc", "robust_acc", "drop", "success_rate"});
  for (const auto& name : cfg.attack.attacks) {
    auto kind = attack_kind_from_name(name);
    auto rng = RngStream::derive(master_seed, "attack/" + name);
    auto report = adv::evaluate_robustness(model, prep.test, kind, cfg.attack.epsilons, rng);
    for (const auto& row : report.rows) {
      curve.row({name, fmt(row.epsilon), fmt(row.clean_accuracy), fmt(row.robust_accuracy),
                 fmt(row.accuracy_drop), fmt(row.success_rate)});
      m["robust_acc:" + name + ":eps=" + fmt(row.epsilon)] = row.robust_accuracy;
      m["drop:" + name + ":eps=" + fmt(row.epsilon)] = row.accuracy_drop;
      m["clean_accuracy"] = row.clean_accuracy;
    }
  }

  csv::Writer examples((dir / "adversarial_examples.csv").string());
  examples.row({"sample_id", "attack", "x0", "x1", "x0_adv", "x1_adv", "fooled"});
  for (const auto& name : cfg.attack.attacks) {
    auto kind = attack_kind_from_name(name);
    adv::AttackSpec spec{kind, cfg.attack.examples_epsilon, cfg.attack.pgd_steps};
    for (std::size_t i = 0; i < prep.test.size(); ++i) {
      auto rng = RngStream::derive(master_seed, "examples/" + name + "/" + std::to_string(i));
      auto x_adv = adv::apply_attack(model, prep.test[i].x, prep.test[i].label, spec, rng);
      bool clean_ok = vqc::predict(model, prep.test[i].x) == prep.test[i].label;
      bool adv_ok = vqc::predict(model, x_adv) == prep.test[i].label;
      examples.row({std::to_string(i), name, fmt(prep.test[i].x[0]), fmt(prep.test[i].x[1]),
                    fmt(x_adv[0]), fmt(x_adv[1]), clean_ok && !adv_ok ? "1" : "0"});
    }
  }

  auto vul = adv::vulnerability_scores(model, prep.test, cfg.attack.vulnerability_epsilon,
                                       static_cast<std::size_t>(cfg.attack.vulnerability_k));
  std::vector<std::size_t> rank(vul.scores.size());
  for (std::size_t i = 0; i < rank.size(); ++i) rank[i] = i;
  std::stable_sort(rank.begin(), rank.end(),
                   [&](std::size_t a, std::size_t b) { return vul.scores[a] > vul.scores[b]; });
  std::vector<std::size_t> position(rank.size());
  for (std::size_t r = 0; r < rank.size(); ++r) position[rank[r]] = r;
  csv::Writer vuln((dir / "vulnerability.csv").string());
  vuln.row({"sample_id", "x0", "x1", "label", "score", "rank"});
  for (std::size_t i = 0; i < prep.test.size(); ++i) {
    vuln.row({std::to_string(i), fmt(prep.test[i].x[0]), fmt(prep.test[i].x[1]),
              std::to_string(prep.test[i].label), fmt(vul.scores[i]),
              std::to_string(position[i])});
  }
  return m;
}

inline Metrics run_defend(const ExperimentConfig& cfg, std::uint64_t master_seed,
                          const std::filesystem::path& dir) {
  auto prep = prepare_data(cfg.data, master_seed);

  auto std_rng = RngStream::derive(master_seed, "train/standard");
  auto standard = vqc::train(prep.train, train_config_of(cfg.train), std_rng).model;

  auto robust_cfg = train_config_of(cfg.train);
  robust_cfg.adversarial = vqc::AdversarialTrainConfig{cfg.defend.epsilon};
  auto adv_rng = RngStream::derive(master_seed, "train/adversarial");
  auto robust = vqc::train(prep.train, robust_cfg, adv_rng).model;

  Metrics m;
  csv::Writer out((dir / "defense_comparison.csv").string());
  std::vector<std::string> header{"model", "clean_accuracy", "lipschitz"};
  for (double eps : cfg.defend.eval_epsilons) header.push_back("robust_acc_eps_" + fmt(eps));
  out.row(header);
  for (const auto& [name, model] :
       std::vector<std::pair<std::string, const vqc::VqcModel*>>{{"standard", &standard},
                                                                 {"adversarial", &robust}}) {
    std::vector<std::string> row{name, fmt(vqc::accuracy(*model, prep.test)),
                                 fmt(vqc::estimate_lipschitz(*model, prep.test))};
    m[name + "_clean_accuracy"] = vqc::accuracy(*model, prep.test);
    m[name + "_lipschitz"] = vqc::estimate_lipschitz(*model, prep.test);
    for (double eps : cfg.defend.eval_epsilons) {
      std::size_t hits = 0;
      for (const auto& s : prep.test) {
        auto x_adv = adv::fgsm(*model, s.x, s.label, eps);
        if (vqc::predict(*model, x_adv) == s.label) ++hits;
      }
      double racc = static_cast<double>(hits) / static_cast<double>(prep.test.size());
      row.push_back(fmt(racc));
      m["robust_acc:" + name + ":eps=" + fmt(eps)] = racc;
    }
    out.row(row);
  }
  write_json_file(vqc::to_json(standard), dir / "model_standard.json");
  write_json_file(vqc::to_json(robust), dir / "model_adversarial.json");
  return m;
}

inline Metrics run_federated(const ExperimentConfig& cfg, std::uint64_t master_seed,
                             const std::filesystem::path& dir) {
  auto prep = prepare_data(cfg.data, master_seed);
  const auto& block = cfg.federated;

  fed::FederatedConfig fc;
  fc.n_clients = block.n_clients;
  fc.rounds = block.rounds;
  fc.local_iterations = block.local_iterations;
  fc.spsa = cfg.train.spsa;
  fc.init_std = cfg.train.init_std;
  if (block.partition == "iid") fc.partition = fed::PartitionScheme::iid();
  if (block.partition == "label_skew") {
    fc.partition = fed::PartitionScheme::label_skew(block.concentration);
  }
  if (block.partition == "quantity_skew") {
    fc.partition = fed::PartitionScheme::quantity_skew(block.concentration);
  }
  if (block.dp_epsilon_per_round) {
    fc.dp = fed::DpConfig{*block.dp_epsilon_per_round, block.dp_delta, block.dp_clip_norm};
  }

  auto log = fed::run_federated(fc, prep.train, prep.test, master_seed);
  {
    std::ofstream rounds(dir / "rounds.jsonl");
    if (!rounds) throw std::runtime_error("cannot open rounds.jsonl");
    for (const auto& r : log.rounds) {
      json line{{"round", r.round},
                {"accuracy", r.accuracy},
                {"epsilon_spent", r.epsilon_spent},
                {"bytes", r.bytes},
                {"per_client_update_norms", r.per_client_update_norms}};
      rounds << line.dump() << '\n';
    }
  }
  write_json_file(vqc::to_json(log.final_model), dir / "model.json");

  // Centralized baseline on the same data for delta/utility metrics.
  auto central_rng = RngStream::derive(master_seed, "centralized");
  auto centralized = vqc::train(prep.train, train_config_of(cfg.train), central_rng).model;
  double central_acc = vqc::accuracy(centralized, prep.test);
  double fed_acc = log.rounds.empty() ? vqc::accuracy(log.final_model, prep.test)
                                      : log.rounds.back().accuracy;

  // Membership inference on both models over matched populations.
  const std::size_t n_mia = std::min<std::size_t>(
      {static_cast<std::size_t>(block.mia_samples), prep.test.size(), prep.train.size() / 2});
  std::vector<data::LabeledSample> members(prep.train.begin(),
                                           prep.train.begin() + static_cast<std::ptrdiff_t>(n_mia));
  std::vector<data::LabeledSample> nonmembers(
      prep.test.begin(), prep.test.begin() + static_cast<std::ptrdiff_t>(n_mia));
  std::vector<data::LabeledSample> auxiliary(
      prep.train.begin() + static_cast<std::ptrdiff_t>(n_mia), prep.train.end());
  auto mia_rng = RngStream::derive(master_seed, "mia/federated");
  auto mia = fed::mia_shadow_attack(log.final_model, members, nonmembers, auxiliary,
                                    block.mia_shadows, train_config_of(cfg.train), mia_rng);
  auto mia_central_rng = RngStream::derive(master_seed, "mia/centralized");
  auto mia_central =
      fed::mia_shadow_attack(centralized, members, nonmembers, auxiliary, block.mia_shadows,
                             train_config_of(cfg.train), mia_central_rng);

  Metrics m;
  m["test_accuracy"] = fed_acc;
  m["centralized_accuracy"] = central_acc;
  m["delta_acc"] = fed_acc - central_acc;
  m["utility_ratio"] = central_acc > 0.0 ? fed_acc / central_acc : 0.0;
  m["mia_success"] = mia.success_rate;
  m["centralized_mia"] = mia_central.success_rate;
  m["privacy_gain"] = mia_central.success_rate - mia.success_rate;
  m["total_bytes"] = static_cast<double>(log.total_bytes);
  if (fc.dp) m["epsilon_total"] = log.ledger.epsilon_total;

  json summary{{"method", fc.dp ? "fl_dp" : "fl_vanilla"},
               {"distribution", block.partition},
               {"epsilon_total", fc.dp ? json(log.ledger.epsilon_total) : json()},
               {"test_acc", fed_acc},
               {"delta_acc", fed_acc - central_acc},
               {"mia_success", mia.success_rate},
               {"privacy_gain", mia_central.success_rate - mia.success_rate},
               {"utility_ratio", m["utility_ratio"]}};
  write_json_file(summary, dir / "federated_summary.json");
  return m;
}

inline Metrics run_replicate(const ExperimentConfig& cfg, std::uint64_t master_seed,
                             const std::filesystem::path& dir) {
  if (cfg.experiment == "train") return run_train(cfg, master_seed, dir);
  if (cfg.experiment == "uq") return run_uq(cfg, master_seed, dir);
  if (cfg.experiment == "shots-study") return run_shots_study(cfg, master_seed, dir);
  if (cfg.experiment == "attack") return run_attack(cfg, master_seed, dir);
  if (cfg.experiment == "defend") return run_defend(cfg, master_seed, dir);
  if (cfg.experiment == "federated") return run_federated(cfg, master_seed, dir);
  throw ConfigError("config: unknown experiment \"" + cfg.experiment + "\"");
}

}  // namespace detail

// Executes all replicates into out_dir/replicate_<i>/ and writes config.json,
// summary.json, and manifest.json at the top level. Replicate i runs with
// master seed cfg.seed + i; results merge sorted by replicate index, so the
// thread count never changes any output.
inline void run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                           int threads = 1) {
  const auto start = std::chrono::steady_clock::now();
  if (threads < 1) threads = 1;
  std::filesystem::path root(out_dir);
  std::filesystem::create_directories(root);

  const int n = cfg.replicates;
  std::vector<Metrics> results(static_cast<std::size_t>(n));
  std::vector<std::filesystem::path> dirs;
  for (int r = 0; r < n; ++r) {
    dirs.push_back(root / ("replicate_" + std::to_string(r)));
    std::filesystem::create_directories(dirs.back());
  }

  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::string first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (int r = next.fetch_add(1); r < n; r = next.fetch_add(1)) {
      if (failed.load()) return;
      try {
        results[static_cast<std::size_t>(r)] =
            detail::run_replicate(cfg, cfg.seed + static_cast<std::uint64_t>(r),
                                  dirs[static_cast<std::size_t>(r)]);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!failed.exchange(true)) first_error = e.what();
        return;
      }
    }
  };
  if (threads == 1 || n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < std::min(threads, n); ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failed.load()) throw std::runtime_error("replicate failed: " + first_error);

  detail::write_json_file(to_json(cfg), root / "config.json");

  json summary;
  summary["experiment"] = cfg.experiment;
  summary["replicates"] = n;
  json metrics = json::object();
  for (const auto& [key, value] : results[0]) {
    std::vector<double> values;
    for (const auto& m : results) {
      auto it = m.find(key);
      if (it != m.end()) values.push_back(it->second);
    }
    json entry;
    entry["mean"] = stats::mean(values);
    entry["std"] = values.size() > 1 ? stats::sample_std(values) : 0.0;
    entry["values"] = values;
    metrics[key] = entry;
  }
  summary["metrics"] = metrics;
  detail::write_json_file(summary, root / "summary.json");

  const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start);
  json manifest{{"seed", cfg.seed},
                {"versions", {{"qtrust", kVersion}}},
                {"wall_time_seconds", elapsed.count()}};
  detail::write_json_file(manifest, root / "manifest.json");
}

struct ReportRow {
  std::string metric;
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t n = 0;
};

// Merges completed run directories: per-metric mean/std over the union of all
// replicate values, sorted by metric name.
inline std::vector<ReportRow> report(const std::vector<std::string>& run_dirs) {
  if (run_dirs.empty()) throw std::invalid_argument("report: need at least one run directory");
  std::map<std::string, std::vector<double>> pooled;
  std::string experiment;
  for (const auto& dir : run_dirs) {
    std::filesystem::path path = std::filesystem::path(dir) / "summary.json";
    std::ifstream in(path);
    if (!in) throw std::runtime_error("report: missing " + path.string());
    json summary;
    try {
      in >> summary;
    } catch (const json::exception& e) {
      throw std::runtime_error("report: invalid summary in " + dir + ": " + e.what());
    }
    std::string exp = summary.at("experiment").get<std::string>();
    if (experiment.empty()) experiment = exp;
    if (exp != experiment) {
      throw std::runtime_error("report: incompatible runs (" + experiment + " vs " + exp + ")");
    }
    for (auto it = summary.at("metrics").begin(); it != summary.at("metrics").end(); ++it) {
      for (double v : it.value().at("values").get<std::vector<double>>()) {
        pooled[it.key()].push_back(v);
      }
    }
  }
  std::vector<ReportRow> rows;
  for (const auto& [key, values] : pooled) {
    ReportRow row;
    row.metric = key;
    row.mean = stats::mean(values);
    row.stddev = values.size() > 1 ? stats::sample_std(values) : 0.0;
    row.n = values.size();
    rows.push_back(row);
  }
  return rows;
}

}  // namespace qtrust::experiments
