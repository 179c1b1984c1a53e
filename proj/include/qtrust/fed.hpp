#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qtrust/rng.hpp"
#include "qtrust/vqc.hpp"

namespace qtrust::fed {

using data::LabeledSample;
using vqc::VqcModel;

using ParamDelta = std::array<double, vqc::kNumParams>;

enum class PartitionKind { Iid, LabelSkew, QuantitySkew };

struct PartitionScheme {
  PartitionKind kind = PartitionKind::Iid;
  double concentration = 0.5;  // Dirichlet parameter for the skew schemes

  static PartitionScheme iid() { return {PartitionKind::Iid, 0.0}; }
  static PartitionScheme label_skew(double beta) { return {PartitionKind::LabelSkew, beta}; }
  static PartitionScheme quantity_skew(double alpha) { return {PartitionKind::QuantitySkew, alpha}; }
};

struct DpConfig {
  double epsilon_per_round = 1.0;
  double delta = 1e-5;
  double clip_norm = 1.0;

  // Gaussian mechanism noise scale for one clipped update.
  double sigma() const {
    return clip_norm * std::sqrt(2.0 * std::log(1.25 / delta)) / epsilon_per_round;
  }
};

struct FederatedConfig {
  int n_clients = 4;
  int rounds = 20;
  int local_iterations = 3;
  PartitionScheme partition;
  std::optional<DpConfig> dp;
  vqc::SpsaConfig spsa;
  double init_std = 0.1;
};

namespace detail {

inline std::vector<double> dirichlet(double concentration, std::size_t k, RngStream& rng) {
  std::gamma_distribution<double> g(concentration, 1.0);
  std::vector<double> v(k);
  double total = 0.0;
  for (auto& x : v) {
    x = std::max(g(rng.engine()), 1e-12);
    total += x;
  }
  for (auto& x : v) x /= total;
  return v;
}

inline void shuffle_indices(std::vector<std::size_t>& idx, RngStream& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.index(i)]);
}

// Largest-remainder apportionment of n items over the given proportions.
inline std::vector<std::size_t> apportion(std::size_t n, const std::vector<double>& props) {
  std::vector<std::size_t> counts(props.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < props.size(); ++i) {
    double exact = props[i] * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[i];
    remainders.push_back({exact - std::floor(exact), i});
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) {
    ++counts[remainders[i % remainders.size()].second];
  }
  return counts;
}

}  // namespace detail

// Disjoint cover of the dataset over n clients. Quantity skew enforces a
// 10-sample minimum per client.
inline std::vector<std::vector<LabeledSample>> partition_dataset(
    const std::vector<LabeledSample>& dataset, const PartitionScheme& scheme, int n_clients,
    RngStream& rng) {
  if (n_clients < 1) throw std::invalid_argument("partition_dataset: n_clients must be >= 1");
  if (dataset.size() < static_cast<std::size_t>(n_clients)) {
    throw std::invalid_argument("partition_dataset: dataset smaller than client count");
  }
  const auto nc = static_cast<std::size_t>(n_clients);
  std::vector<std::vector<LabeledSample>> clients(nc);

  switch (scheme.kind) {
    case PartitionKind::Iid: {
      std::vector<std::size_t> idx(dataset.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      detail::shuffle_indices(idx, rng);
      for (std::size_t i = 0; i < idx.size(); ++i) {
        clients[i % nc].push_back(dataset[idx[i]]);
      }
      break;
    }
    case PartitionKind::LabelSkew: {
      for (int label : {-1, +1}) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < dataset.size(); ++i) {
          if (dataset[i].label == label) idx.push_back(i);
        }
        detail::shuffle_indices(idx, rng);
        auto props = detail::dirichlet(scheme.concentration, nc, rng);
        auto counts = detail::apportion(idx.size(), props);
        std::size_t cursor = 0;
        for (std::size_t c = 0; c < nc; ++c) {
          for (std::size_t k = 0; k < counts[c]; ++k) {
            clients[c].push_back(dataset[idx[cursor++]]);
          }
        }
      }
      break;
    }
    case PartitionKind::QuantitySkew: {
      const std::size_t minimum = 10;
      if (dataset.size() < minimum * nc) {
        throw std::invalid_argument("partition_dataset: dataset too small for quantity-skew minimums");
      }
      std::vector<std::size_t> idx(dataset.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      detail::shuffle_indices(idx, rng);
      auto props = detail::dirichlet(scheme.concentration, nc, rng);
      std::size_t spare = dataset.size() - minimum * nc;
      auto extra = detail::apportion(spare, props);
      std::size_t cursor = 0;
      for (std::size_t c = 0; c < nc; ++c) {
        for (std::size_t k = 0; k < minimum + extra[c]; ++k) {
          clients[c].push_back(dataset[idx[cursor++]]);
        }
      }
      break;
    }
  }
  return clients;
}

// Local SPSA refinement from the global parameters; returns the parameter
// delta. The gain schedule index continues across rounds via k_offset.
inline ParamDelta local_update(const VqcModel& global_model,
                               const std::vector<LabeledSample>& client_data, int local_iterations,
                               const vqc::SpsaConfig& spsa, int k_offset, RngStream& rng) {
  if (local_iterations < 0) throw std::invalid_argument("local_update: negative iteration count");
  if (client_data.empty()) throw std::invalid_argument("local_update: empty client data");
  VqcModel model = global_model;
  for (int j = 0; j < local_iterations; ++j) {
    model.params = vqc::spsa_step(model, client_data, k_offset + j, spsa, rng);
  }
  ParamDelta delta{};
  for (std::size_t i = 0; i < delta.size(); ++i) {
    delta[i] = model.params[i] - global_model.params[i];
  }
  return delta;
}

inline double l2_norm(const ParamDelta& d) {
  double acc = 0.0;
  for (double v : d) acc += v * v;
  return std::sqrt(acc);
}

inline ParamDelta clip_to_norm(ParamDelta delta, double clip_norm) {
  double norm = l2_norm(delta);
  if (norm > clip_norm) {
    for (auto& v : delta) v *= clip_norm / norm;
  }
  return delta;
}

// Gaussian mechanism: clip the update to L2 norm <= C, then add per-coordinate
// noise with the (epsilon, delta)-calibrated sigma.
inline ParamDelta clip_and_noise(const ParamDelta& delta, const DpConfig& dp, RngStream& rng) {
  ParamDelta out = clip_to_norm(delta, dp.clip_norm);
  const double sigma = dp.sigma();
  for (auto& v : out) v += rng.normal(0.0, sigma);
  return out;
}

inline std::array<double, vqc::kNumParams> fedavg_aggregate(
    const std::array<double, vqc::kNumParams>& global_params,
    const std::vector<ParamDelta>& updates) {
  if (updates.empty()) throw std::invalid_argument("fedavg_aggregate: no updates");
  auto next = global_params;
  for (std::size_t i = 0; i < next.size(); ++i) {
    double acc = 0.0;
    for (const auto& u : updates) acc += u[i];
    next[i] += acc / static_cast<double>(updates.size());
  }
  return next;
}

struct PrivacyLedger {
  std::vector<double> per_round_epsilon;
  double epsilon_total = 0.0;
  double delta_total = 0.0;
};

// Basic (linear) composition over rounds.
inline PrivacyLedger compose_privacy(double epsilon_per_round, double delta, int rounds) {
  if (epsilon_per_round <= 0.0 || rounds < 0) {
    throw std::invalid_argument("compose_privacy: inputs must be positive");
  }
  PrivacyLedger ledger;
  ledger.per_round_epsilon.assign(static_cast<std::size_t>(rounds), epsilon_per_round);
  ledger.epsilon_total = static_cast<double>(rounds) * epsilon_per_round;
  ledger.delta_total = static_cast<double>(rounds) * delta;
  return ledger;
}

// Artifact-defined accounting: each round every client uploads and downloads
// one parameter vector; 8 bytes per parameter plus a 32-byte message header.
inline std::int64_t communication_cost(int n_clients, int param_count, int rounds) {
  const std::int64_t per_message = static_cast<std::int64_t>(param_count) * 8 + 32;
  return static_cast<std::int64_t>(rounds) * n_clients * 2 * per_message;
}

struct RoundRecord {
  int round = 0;
  double accuracy = 0.0;
  double epsilon_spent = 0.0;  // cumulative
  std::int64_t bytes = 0;      // cumulative
  std::vector<double> per_client_update_norms;  // post-clip, pre-noise
};

struct FederatedRunLog {
  VqcModel final_model;
  std::vector<RoundRecord> rounds;
  PrivacyLedger ledger;
  std::int64_t total_bytes = 0;
};

inline FederatedRunLog run_federated(const FederatedConfig& config,
                                     const std::vector<LabeledSample>& train_set,
                                     const std::vector<LabeledSample>& test_set,
                                     std::uint64_t master_seed) {
  if (config.n_clients < 1 || config.rounds < 0) {
    throw std::invalid_argument("run_federated: invalid client or round count");
  }
  auto partition_rng = RngStream::derive(master_seed, "fed/partition");
  auto clients = partition_dataset(train_set, config.partition, config.n_clients, partition_rng);

  auto init_rng = RngStream::derive(master_seed, "fed/init");
  FederatedRunLog log;
  log.final_model = vqc::init_model(config.init_std, init_rng);
  if (config.dp) {
    log.ledger = compose_privacy(config.dp->epsilon_per_round, config.dp->delta, config.rounds);
  }

  const std::int64_t bytes_per_round = communication_cost(config.n_clients, vqc::kNumParams, 1);
  std::int64_t bytes = 0;

  for (int t = 0; t < config.rounds; ++t) {
    std::vector<ParamDelta> updates;
    RoundRecord record;
    record.round = t;
    for (int i = 0; i < config.n_clients; ++i) {
      auto client_rng = RngStream::derive(
          master_seed, "fed/client/" + std::to_string(i) + "/round/" + std::to_string(t));
      auto delta = local_update(log.final_model, clients[static_cast<std::size_t>(i)],
                                config.local_iterations, config.spsa,
                                t * config.local_iterations, client_rng);
      if (config.dp) {
        auto clipped = clip_to_norm(delta, config.dp->clip_norm);
        record.per_client_update_norms.push_back(l2_norm(clipped));
        auto dp_rng = RngStream::derive(
            master_seed, "fed/dp/" + std::to_string(i) + "/round/" + std::to_string(t));
        const double sigma = config.dp->sigma();
        for (auto& v : clipped) v += dp_rng.normal(0.0, sigma);
        updates.push_back(clipped);
      } else {
        record.per_client_update_norms.push_back(l2_norm(delta));
        updates.push_back(delta);
      }
    }
    log.final_model.params = fedavg_aggregate(log.final_model.params, updates);
    bytes += bytes_per_round;
    record.accuracy = vqc::accuracy(log.final_model, test_set);
    record.epsilon_spent = config.dp ? config.dp->epsilon_per_round * static_cast<double>(t + 1) : 0.0;
    record.bytes = bytes;
    log.rounds.push_back(record);
  }
  log.total_bytes = bytes;
  return log;
}

struct MiaReport {
  double success_rate = 0.5;  // balanced accuracy over member/non-member sets
  std::size_t n_member = 0;
  std::size_t n_nonmember = 0;
  double threshold = 0.0;
};

inline double confidence_of(const VqcModel& model, const std::array<double, 2>& x) {
  double p1 = (1.0 - vqc::decision_value(model, x)) / 2.0;
  return std::max(p1, 1.0 - p1);
}

namespace detail {

inline double balanced_accuracy(const std::vector<double>& member_conf,
                                const std::vector<double>& nonmember_conf, double threshold) {
  double tpr = 0.0, tnr = 0.0;
  for (double c : member_conf) tpr += c >= threshold ? 1.0 : 0.0;
  for (double c : nonmember_conf) tnr += c < threshold ? 1.0 : 0.0;
  tpr /= static_cast<double>(member_conf.size());
  tnr /= static_cast<double>(nonmember_conf.size());
  return 0.5 * (tpr + tnr);
}

}  // namespace detail

// Shadow-model membership inference: shadow models trained on disjoint splits
// of auxiliary data fit a max-confidence threshold, applied to the target.
inline MiaReport mia_shadow_attack(const VqcModel& target,
                                   const std::vector<LabeledSample>& member_set,
                                   const std::vector<LabeledSample>& nonmember_set,
                                   const std::vector<LabeledSample>& auxiliary, int n_shadow,
                                   const vqc::TrainConfig& train_cfg, RngStream& rng) {
  if (member_set.empty() || nonmember_set.empty()) {
    throw std::invalid_argument("mia_shadow_attack: member/non-member sets must be non-empty");
  }
  if (n_shadow < 1) throw std::invalid_argument("mia_shadow_attack: n_shadow must be >= 1");
  const std::size_t chunks = static_cast<std::size_t>(n_shadow) * 2;
  if (auxiliary.size() < chunks * 2) {
    throw std::invalid_argument("mia_shadow_attack: insufficient auxiliary data");
  }

  // Disjoint chunks: shadow s trains on chunk 2s (members), chunk 2s+1 is its
  // held-out non-member pool.
  std::vector<double> shadow_member_conf, shadow_nonmember_conf;
  const std::size_t chunk_size = auxiliary.size() / chunks;
  for (int s = 0; s < n_shadow; ++s) {
    auto begin_m = auxiliary.begin() + static_cast<std::ptrdiff_t>(2 * static_cast<std::size_t>(s) * chunk_size);
    std::vector<LabeledSample> train_chunk(begin_m, begin_m + static_cast<std::ptrdiff_t>(chunk_size));
    std::vector<LabeledSample> holdout_chunk(begin_m + static_cast<std::ptrdiff_t>(chunk_size),
                                             begin_m + static_cast<std::ptrdiff_t>(2 * chunk_size));
    auto shadow_rng = rng.derive("shadow/" + std::to_string(s));
    auto shadow = vqc::train(train_chunk, train_cfg, shadow_rng).model;
    for (const auto& x : train_chunk) shadow_member_conf.push_back(confidence_of(shadow, x.x));
    for (const auto& x : holdout_chunk) shadow_nonmember_conf.push_back(confidence_of(shadow, x.x));
  }

  // Threshold maximizing balanced accuracy on the shadow populations.
  std::vector<double> candidates = shadow_member_conf;
  candidates.insert(candidates.end(), shadow_nonmember_conf.begin(), shadow_nonmember_conf.end());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  double best_threshold = 0.5, best_score = -1.0;
  for (double cand : candidates) {
    double score = detail::balanced_accuracy(shadow_member_conf, shadow_nonmember_conf, cand);
    if (score > best_score) {
      best_score = score;
      best_threshold = cand;
    }
  }

  std::vector<double> member_conf, nonmember_conf;
  for (const auto& s : member_set) member_conf.push_back(confidence_of(target, s.x));
  for (const auto& s : nonmember_set) nonmember_conf.push_back(confidence_of(target, s.x));

  MiaReport report;
  report.success_rate = detail::balanced_accuracy(member_conf, nonmember_conf, best_threshold);
  report.n_member = member_set.size();
  report.n_nonmember = nonmember_set.size();
  report.threshold = best_threshold;
  return report;
}

}  // namespace qtrust::fed
