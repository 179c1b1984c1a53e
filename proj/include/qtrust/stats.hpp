#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace qtrust::stats {

inline double mean(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("mean: empty vector");
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

// Sample standard deviation (n - 1 denominator).
inline double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) throw std::invalid_argument("sample_std: need >= 2 values");
  double m = mean(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median: empty vector");
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

namespace detail {

// Regularized incomplete beta via Lentz continued fraction.
inline double betacf(double a, double b, double x) {
  const double eps = 1e-14, fpmin = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::abs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 300; ++m) {
    double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) break;
  }
  return h;
}

inline double incbeta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double lbeta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  double front = std::exp(a * std::log(x) + b * std::log(1.0 - x) - lbeta);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - std::exp(b * std::log(1.0 - x) + a * std::log(x) - lbeta) * betacf(b, a, 1.0 - x) / b;
}

}  // namespace detail

// Two-sided p-value of a t statistic; normal approximation above 30 degrees
// of freedom, exact Student-t CDF below.
inline double two_sided_p(double t, double df) {
  double at = std::abs(t);
  if (df > 30.0) return 2.0 * (1.0 - normal_cdf(at));
  double x = df / (df + at * at);
  return detail::incbeta(df / 2.0, 0.5, x);
}

struct GroupStats {
  double correct_mean, correct_std, correct_median;
  double incorrect_mean, incorrect_std, incorrect_median;
  double welch_t;
  double welch_df;
  double p_value;
  double cohens_d;  // positive when the incorrect-group mean is larger
};

inline GroupStats group_statistics(const std::vector<double>& correct_group,
                                   const std::vector<double>& incorrect_group) {
  if (correct_group.size() < 2 || incorrect_group.size() < 2) {
    throw std::invalid_argument("group_statistics: each group needs >= 2 samples");
  }
  GroupStats g{};
  g.correct_mean = mean(correct_group);
  g.correct_std = sample_std(correct_group);
  g.correct_median = median(correct_group);
  g.incorrect_mean = mean(incorrect_group);
  g.incorrect_std = sample_std(incorrect_group);
  g.incorrect_median = median(incorrect_group);

  const double n1 = static_cast<double>(correct_group.size());
  const double n2 = static_cast<double>(incorrect_group.size());
  const double v1 = g.correct_std * g.correct_std;
  const double v2 = g.incorrect_std * g.incorrect_std;
  const double se2 = v1 / n1 + v2 / n2;
  const double diff = g.incorrect_mean - g.correct_mean;
  if (se2 > 0.0) {
    g.welch_t = diff / std::sqrt(se2);
    g.welch_df = se2 * se2 /
                 (v1 * v1 / (n1 * n1 * (n1 - 1.0)) + v2 * v2 / (n2 * n2 * (n2 - 1.0)));
    g.p_value = two_sided_p(g.welch_t, g.welch_df);
  } else {
    g.welch_t = 0.0;
    g.welch_df = n1 + n2 - 2.0;
    g.p_value = 1.0;
  }
  double pooled = std::sqrt(((n1 - 1.0) * v1 + (n2 - 1.0) * v2) / (n1 + n2 - 2.0));
  g.cohens_d = pooled > 0.0 ? diff / pooled : 0.0;
  return g;
}

// Least-squares slope of y on x.
inline double regression_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("regression_slope: need matched vectors of size >= 2");
  }
  double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw std::invalid_argument("regression_slope: degenerate x");
  return sxy / sxx;
}

}  // namespace qtrust::stats
