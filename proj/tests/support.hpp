// Test-only oracles and statistics. Nothing here calls into the code paths
// it is used to check.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

namespace qsd::testing {

/// Closed-form QSD of the two-state chain q(1,2)=q(2,1)=q(1,0)=1:
/// left eigenvector of [[-2,1],[1,-1]] for lambda = (-3+sqrt5)/2.
inline const double kSqrt5 = std::sqrt(5.0);
inline const double kT2Lambda = (-3.0 + kSqrt5) / 2.0;
inline const double kT2Nu1 = (3.0 - kSqrt5) / 2.0;
inline const double kT2Nu2 = (kSqrt5 - 1.0) / 2.0;

using Matrix = std::vector<std::vector<double>>;

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  const std::size_t n = a.size();
  Matrix c(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t j = 0; j < n; ++j) c[i][j] += a[i][k] * b[k][j];
  return c;
}

/// exp(tG) for a full generator G (rows sum to 0) by the uniformization
/// series sum_k e^{-Lt} (Lt)^k / k! P^k with P = I + G/L.
inline Matrix expm_uniformization(const Matrix& g, double t) {
  const std::size_t n = g.size();
  double rate = 0.0;
  for (std::size_t i = 0; i < n; ++i) rate = std::max(rate, -g[i][i]);
  rate = std::max(rate, 1e-12);
  Matrix p(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) p[i][j] = (i == j ? 1.0 : 0.0) + g[i][j] / rate;
  Matrix power(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) power[i][i] = 1.0;
  Matrix out(n, std::vector<double>(n, 0.0));
  double weight = std::exp(-rate * t);
  for (int k = 0; k < 400; ++k) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) out[i][j] += weight * power[i][j];
    weight *= rate * t / (k + 1);
    power = matmul(power, p);
  }
  return out;
}

/// Law of the two-state chain at time t started from `start` (1 or 2),
/// conditioned on survival, using the 3-state generator on {0,1,2}.
inline std::vector<double> t2_conditioned_law(int start, double t) {
  const Matrix g = {{0, 0, 0}, {1, -2, 1}, {0, 1, -1}};
  const Matrix e = expm_uniformization(g, t);
  const double survive = 1.0 - e[start][0];
  return {e[start][1] / survive, e[start][2] / survive};
}

struct Summary {
  double mean = 0.0;
  double sd = 0.0;
  double se = 0.0;
};

inline Summary summarize(const std::vector<double>& xs) {
  Summary s;
  const double n = static_cast<double>(xs.size());
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - s.mean) * (x - s.mean);
  s.sd = xs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  s.se = s.sd / std::sqrt(n);
  return s;
}

/// Upper-tail p-value of a chi-square statistic.
inline double chi_square_p(double stat, double dof) {
  if (dof <= 0) return 1.0;
  boost::math::chi_squared dist(dof);
  return boost::math::cdf(boost::math::complement(dist, stat));
}

/// Goodness of fit of observed counts to probabilities; cells with expected
/// count below 5 are pooled into their neighbour.
inline double chi_square_gof_p(const std::vector<double>& observed,
                               const std::vector<double>& probs) {
  const double n = std::accumulate(observed.begin(), observed.end(), 0.0);
  std::vector<double> o, e;
  double acc_o = 0.0, acc_e = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    acc_o += observed[i];
    acc_e += probs[i] * n;
    if (acc_e >= 5.0) {
      o.push_back(acc_o);
      e.push_back(acc_e);
      acc_o = acc_e = 0.0;
    }
  }
  if (acc_e > 0.0 || acc_o > 0.0) {
    if (e.empty()) return 1.0;
    o.back() += acc_o;
    e.back() += acc_e;
  }
  double stat = 0.0;
  for (std::size_t i = 0; i < o.size(); ++i) stat += (o[i] - e[i]) * (o[i] - e[i]) / e[i];
  return chi_square_p(stat, static_cast<double>(o.size()) - 1.0);
}

/// Two-sample chi-square homogeneity test on samples of a discrete variable.
/// Bins with pooled count below 10 are merged in key order.
template <typename Key>
double two_sample_chi_square_p(const std::vector<Key>& a, const std::vector<Key>& b) {
  std::map<Key, std::pair<double, double>> counts;
  for (const Key& k : a) counts[k].first += 1.0;
  for (const Key& k : b) counts[k].second += 1.0;
  std::vector<std::pair<double, double>> bins;
  std::pair<double, double> acc{0.0, 0.0};
  for (const auto& [k, c] : counts) {
    acc.first += c.first;
    acc.second += c.second;
    if (acc.first + acc.second >= 10.0) {
      bins.push_back(acc);
      acc = {0.0, 0.0};
    }
  }
  if (acc.first + acc.second > 0.0) {
    if (bins.empty()) return 1.0;
    bins.back().first += acc.first;
    bins.back().second += acc.second;
  }
  if (bins.size() < 2) return 1.0;
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  double stat = 0.0;
  for (const auto& [ca, cb] : bins) {
    const double tot = ca + cb;
    const double ea = tot * na / (na + nb);
    const double eb = tot * nb / (na + nb);
    stat += (ca - ea) * (ca - ea) / ea + (cb - eb) * (cb - eb) / eb;
  }
  return chi_square_p(stat, static_cast<double>(bins.size()) - 1.0);
}

}  // namespace qsd::testing
