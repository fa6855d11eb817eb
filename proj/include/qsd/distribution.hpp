#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "qsd/rng.hpp"

namespace qsd {

/// Non-absorbing states are 1, 2, ...; 0 is the cemetery.
using State = std::uint32_t;
inline constexpr State kAbsorbing = 0;

/// Probability vector with finite support on the non-absorbing states.
///
/// Entries are kept sorted by state, which doubles as the fixed state
/// numbering used by interval partitions of [0, 1): state y owns
/// [F(y-), F(y)) where F is the cumulative mass in that order.
class Distribution {
 public:
  struct Entry {
    State state;
    double mass;
  };

  /// Masses below this (after normalization) are treated as zero.
  static constexpr double kNegligibleMass = 1e-15;

  Distribution() = default;

  static Distribution delta(State x);
  static Distribution uniform(std::span<const State> states);
  /// Normalizes nonnegative weights; duplicates are summed. Throws on
  /// negative weights, state 0, or zero total.
  static Distribution from_weights(std::vector<Entry> weights);
  /// weights[i] is the weight of state i + 1.
  static Distribution from_dense(std::span<const double> weights);

  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  std::span<const Entry> entries() const { return entries_; }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  double mass(State x) const;
  State max_state() const { return entries_.empty() ? 0 : entries_.back().state; }
  double total() const;

  /// State whose interval contains u, for u in [0, 1).
  State inverse_cdf(double u) const;
  State sample(RngStream& rng) const { return inverse_cdf(rng.uniform()); }

  /// Dense copy on {1..k}; mass outside is dropped.
  std::vector<double> dense(std::size_t k) const;

  friend bool operator==(const Distribution& a, const Distribution& b);

 private:
  std::vector<Entry> entries_;
  std::vector<double> cumulative_;
};

/// Half the l1 distance over the union of supports.
double tv_distance(const Distribution& a, const Distribution& b);

/// weight * a + (1 - weight) * b.
Distribution mixture(const Distribution& a, const Distribution& b, double weight);

}  // namespace qsd
