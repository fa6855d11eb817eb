#include "qsd/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qsd/error.hpp"

namespace qsd {

Distribution Distribution::delta(State x) { return from_weights({{x, 1.0}}); }

Distribution Distribution::uniform(std::span<const State> states) {
  std::vector<Entry> w;
  w.reserve(states.size());
  for (State s : states) w.push_back({s, 1.0});
  return from_weights(std::move(w));
}

Distribution Distribution::from_dense(std::span<const double> weights) {
  std::vector<Entry> w;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] != 0.0) w.push_back({static_cast<State>(i + 1), weights[i]});
  }
  return from_weights(std::move(w));
}

Distribution Distribution::from_weights(std::vector<Entry> weights) {
  std::sort(weights.begin(), weights.end(),
            [](const Entry& a, const Entry& b) { return a.state < b.state; });
  std::vector<Entry> merged;
  merged.reserve(weights.size());
  for (const Entry& e : weights) {
    if (e.state == kAbsorbing) {
      fail(ErrorCode::kInvalidArgument, "distribution cannot charge state 0");
    }
    if (!(e.mass >= 0.0) || !std::isfinite(e.mass)) {
      fail(ErrorCode::kInvalidArgument,
           "invalid weight at state " + std::to_string(e.state));
    }
    if (!merged.empty() && merged.back().state == e.state) {
      merged.back().mass += e.mass;
    } else {
      merged.push_back(e);
    }
  }

  // Two passes: drop negligible mass, then renormalize what is left.
  for (int pass = 0; pass < 2; ++pass) {
    double total = 0.0;
    for (const Entry& e : merged) total += e.mass;
    if (!(total > 0.0)) fail(ErrorCode::kInvalidArgument, "distribution has zero mass");
    for (Entry& e : merged) e.mass /= total;
    std::erase_if(merged, [](const Entry& e) { return e.mass < kNegligibleMass; });
  }

  Distribution d;
  d.entries_ = std::move(merged);
  d.cumulative_.resize(d.entries_.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < d.entries_.size(); ++i) {
    acc += d.entries_[i].mass;
    d.cumulative_[i] = acc;
  }
  return d;
}

double Distribution::mass(State x) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), x,
                             [](const Entry& e, State s) { return e.state < s; });
  return (it != entries_.end() && it->state == x) ? it->mass : 0.0;
}

double Distribution::total() const {
  double t = 0.0;
  for (const Entry& e : entries_) t += e.mass;
  return t;
}

State Distribution::inverse_cdf(double u) const {
  if (entries_.empty()) fail(ErrorCode::kInvalidArgument, "sampling an empty distribution");
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  if (it == cumulative_.end()) return entries_.back().state;
  return entries_[static_cast<std::size_t>(it - cumulative_.begin())].state;
}

std::vector<double> Distribution::dense(std::size_t k) const {
  std::vector<double> out(k, 0.0);
  for (const Entry& e : entries_) {
    if (e.state <= k) out[e.state - 1] = e.mass;
  }
  return out;
}

bool operator==(const Distribution& a, const Distribution& b) {
  if (a.entries_.size() != b.entries_.size()) return false;
  for (std::size_t i = 0; i < a.entries_.size(); ++i) {
    if (a.entries_[i].state != b.entries_[i].state ||
        a.entries_[i].mass != b.entries_[i].mass) {
      return false;
    }
  }
  return true;
}

double tv_distance(const Distribution& a, const Distribution& b) {
  auto ia = a.begin();
  auto ib = b.begin();
  double sum = 0.0;
  while (ia != a.end() || ib != b.end()) {
    if (ib == b.end() || (ia != a.end() && ia->state < ib->state)) {
      sum += ia->mass;
      ++ia;
    } else if (ia == a.end() || ib->state < ia->state) {
      sum += ib->mass;
      ++ib;
    } else {
      sum += std::abs(ia->mass - ib->mass);
      ++ia;
      ++ib;
    }
  }
  return std::min(1.0, 0.5 * sum);
}

Distribution mixture(const Distribution& a, const Distribution& b, double weight) {
  if (weight < 0.0 || weight > 1.0) {
    fail(ErrorCode::kInvalidArgument, "mixture weight outside [0, 1]");
  }
  std::vector<Distribution::Entry> w;
  w.reserve(a.size() + b.size());
  for (const auto& e : a) w.push_back({e.state, weight * e.mass});
  for (const auto& e : b) w.push_back({e.state, (1.0 - weight) * e.mass});
  return Distribution::from_weights(std::move(w));
}

}  // namespace qsd
