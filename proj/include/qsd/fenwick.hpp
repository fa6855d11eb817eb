#pragma once

#include <cstddef>
#include <vector>

namespace qsd {

/// Binary indexed tree over nonnegative weights with weighted search.
class FenwickTree {
 public:
  FenwickTree() = default;
  explicit FenwickTree(std::size_t n) : tree_(n + 1, 0.0), weight_(n, 0.0) {}

  std::size_t size() const { return weight_.size(); }
  double weight(std::size_t i) const { return weight_[i]; }
  double total() const { return total_; }

  void set(std::size_t i, double w) {
    const double delta = w - weight_[i];
    weight_[i] = w;
    total_ += delta;
    for (std::size_t j = i + 1; j < tree_.size(); j += j & (~j + 1)) tree_[j] += delta;
  }

  /// Grows capacity, keeping weights; new slots have weight 0.
  void resize(std::size_t n) {
    weight_.resize(n, 0.0);
    rebuild();
  }

  /// Recomputes internal sums from the stored weights (clears rounding drift).
  void rebuild() {
    tree_.assign(weight_.size() + 1, 0.0);
    total_ = 0.0;
    for (std::size_t i = 0; i < weight_.size(); ++i) {
      total_ += weight_[i];
      tree_[i + 1] += weight_[i];
      const std::size_t parent = (i + 1) + ((i + 1) & (~(i + 1) + 1));
      if (parent < tree_.size()) tree_[parent] += tree_[i + 1];
    }
  }

  /// Sum of weights [0, i).
  double prefix(std::size_t i) const {
    double s = 0.0;
    for (std::size_t j = i; j > 0; j -= j & (~j + 1)) s += tree_[j];
    return s;
  }

  /// Smallest i with prefix(i + 1) > target, skipping zero-weight slots that
  /// rounding might land on. Requires total() > 0.
  std::size_t find(double target) const {
    std::size_t pos = 0;
    std::size_t step = 1;
    while (step * 2 < tree_.size()) step *= 2;
    for (; step > 0; step /= 2) {
      const std::size_t nxt = pos + step;
      if (nxt < tree_.size() && tree_[nxt] <= target) {
        pos = nxt;
        target -= tree_[nxt];
      }
    }
    std::size_t i = pos < weight_.size() ? pos : weight_.size() - 1;
    while (i > 0 && weight_[i] <= 0.0) --i;
    while (i + 1 < weight_.size() && weight_[i] <= 0.0) ++i;
    return i;
  }

 private:
  std::vector<double> tree_;
  std::vector<double> weight_;
  double total_ = 0.0;
};

}  // namespace qsd
