#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qtrust/csv.hpp"
#include "qtrust/rng.hpp"

namespace qtrust::data {

inline constexpr double kPi = 3.14159265358979323846;

// Binary classification sample with labels in {-1, +1}.
struct LabeledSample {
  std::array<double, 2> x{0.0, 0.0};
  int label = +1;
};

struct Standardization {
  std::array<double, 2> mean{0.0, 0.0};
  std::array<double, 2> stddev{1.0, 1.0};
};

struct Dataset {
  std::vector<LabeledSample> samples;
  std::optional<Standardization> standardization;

  std::size_t size() const { return samples.size(); }
};

// Two interleaved half-circles with Gaussian coordinate noise. Upper arc is
// class -1, lower arc is class +1.
inline Dataset make_two_moons(int n, double noise_std, RngStream& rng) {
  if (n < 2) throw std::invalid_argument("make_two_moons: n must be >= 2");
  Dataset ds;
  ds.samples.reserve(static_cast<std::size_t>(n));
  const int n_upper = (n + 1) / 2;
  for (int i = 0; i < n; ++i) {
    const double t = rng.uniform(0.0, kPi);
    LabeledSample s;
    if (i < n_upper) {
      s.x = {std::cos(t), std::sin(t)};
      s.label = -1;
    } else {
      s.x = {1.0 - std::cos(t), 0.5 - std::sin(t)};
      s.label = +1;
    }
    s.x[0] += rng.normal(0.0, noise_std);
    s.x[1] += rng.normal(0.0, noise_std);
    ds.samples.push_back(s);
  }
  return ds;
}

inline Standardization fit_standardization(const Dataset& fit_split) {
  if (fit_split.samples.empty()) throw std::invalid_argument("standardize: empty fit split");
  Standardization st;
  const double n = static_cast<double>(fit_split.samples.size());
  for (int d = 0; d < 2; ++d) {
    double mean = 0.0;
    for (const auto& s : fit_split.samples) mean += s.x[static_cast<std::size_t>(d)];
    mean /= n;
    double var = 0.0;
    for (const auto& s : fit_split.samples) {
      double c = s.x[static_cast<std::size_t>(d)] - mean;
      var += c * c;
    }
    var /= n;
    if (var <= 0.0) throw std::invalid_argument("standardize: zero-variance feature");
    st.mean[static_cast<std::size_t>(d)] = mean;
    st.stddev[static_cast<std::size_t>(d)] = std::sqrt(var);
  }
  return st;
}

inline Dataset apply_standardization(Dataset ds, const Standardization& st) {
  for (auto& s : ds.samples) {
    for (std::size_t d = 0; d < 2; ++d) s.x[d] = (s.x[d] - st.mean[d]) / st.stddev[d];
  }
  ds.standardization = st;
  return ds;
}

inline Dataset invert_standardization(Dataset ds, const Standardization& st) {
  for (auto& s : ds.samples) {
    for (std::size_t d = 0; d < 2; ++d) s.x[d] = s.x[d] * st.stddev[d] + st.mean[d];
  }
  ds.standardization.reset();
  return ds;
}

// Stratified train/test split: shuffles within each class, then takes the
// train fraction from each, so class ratios are preserved within one sample.
inline std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, RngStream& rng) {
  if (train_fraction <= 0.0 || train_fraction >= 1.0) {
    throw std::invalid_argument("split: train_fraction must be in (0, 1)");
  }
  std::vector<std::size_t> neg, pos;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    (ds.samples[i].label < 0 ? neg : pos).push_back(i);
  }
  auto shuffle = [&rng](std::vector<std::size_t>& idx) {
    for (std::size_t i = idx.size(); i > 1; --i) {
      std::swap(idx[i - 1], idx[rng.index(i)]);
    }
  };
  shuffle(neg);
  shuffle(pos);
  Dataset train, test;
  for (const auto* cls : {&neg, &pos}) {
    const std::size_t n_train =
        static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(cls->size())));
    for (std::size_t i = 0; i < cls->size(); ++i) {
      (i < n_train ? train : test).samples.push_back(ds.samples[(*cls)[i]]);
    }
  }
  if (train.samples.empty() || test.samples.empty()) {
    throw std::invalid_argument("split: degenerate split sizes");
  }
  return {train, test};
}

inline void write_csv(const Dataset& ds, const std::string& path) {
  csv::Writer w(path);
  w.row({"x0", "x1", "label"});
  for (const auto& s : ds.samples) {
    w.row({csv::format_double(s.x[0]), csv::format_double(s.x[1]), std::to_string(s.label)});
  }
}

inline Dataset read_csv(const std::string& path) {
  auto rows = csv::read_file(path);
  if (rows.empty() || rows[0] != std::vector<std::string>{"x0", "x1", "label"}) {
    throw std::runtime_error("dataset csv: bad header in " + path);
  }
  Dataset ds;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 3) throw std::runtime_error("dataset csv: bad row in " + path);
    LabeledSample s;
    s.x[0] = std::stod(rows[i][0]);
    s.x[1] = std::stod(rows[i][1]);
    s.label = std::stoi(rows[i][2]);
    if (s.label != -1 && s.label != 1) throw std::runtime_error("dataset csv: label must be -1 or 1");
    ds.samples.push_back(s);
  }
  return ds;
}

}  // namespace qtrust::data
