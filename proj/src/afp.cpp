#include "qsd/afp.hpp"

#include <algorithm>

#include "qsd/error.hpp"

namespace qsd {

AfpHistory::AfpHistory(std::size_t k, State start, std::uint64_t initial_mass)
    : counts_(k, 0), tree_(k + 1, 0), walker_(start), total_(0) {
  if (start == kAbsorbing || start > k) fail(ErrorCode::kInvalidArgument, "start state outside {1..K}");
  if (initial_mass == 0 || initial_mass > kMassLimit) {
    fail(ErrorCode::kInvalidArgument, "initial history mass must be in [1, 2^62]");
  }
  counts_[start - 1] = initial_mass;
  for (std::size_t j = start; j < tree_.size(); j += j & (~j + 1)) tree_[j] += initial_mass;
  total_ = initial_mass;
}

Distribution AfpHistory::estimate() const {
  std::vector<double> w(counts_.size());
  for (std::size_t i = 0; i < counts_.size(); ++i) w[i] = static_cast<double>(counts_[i]);
  return Distribution::from_dense(w);
}

State AfpHistory::history_at(std::uint64_t target) const {
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
  return static_cast<State>(pos + 1);
}

void AfpHistory::record(State y) {
  if (total_ >= kMassLimit) fail(ErrorCode::kUnsupported, "history mass reached 2^62");
  ++counts_[y - 1];
  for (std::size_t j = y; j < tree_.size(); j += j & (~j + 1)) ++tree_[j];
  ++total_;
  ++steps_;
  walker_ = y;
}

State afp_step(AfpHistory& h, const DiscreteChainModel& d, RngStream& rng) {
  const State x = h.walker();
  double u = rng.uniform();
  State y = kAbsorbing;
  for (const auto& e : d.rows[x - 1]) {
    if (u < e.p) {
      y = e.to;
      break;
    }
    u -= e.p;
  }
  if (y == kAbsorbing) y = h.history_at(rng.below(h.total()));
  h.record(y);
  return y;
}

AfpRun afp_run(const DiscreteChainModel& d, State start, std::uint64_t n, RngStream& rng,
               const std::vector<std::uint64_t>& checkpoints,
               const std::optional<Distribution>& reference) {
  if (n == 0) fail(ErrorCode::kInvalidArgument, "need at least one step");
  std::vector<std::uint64_t> marks = checkpoints;
  std::sort(marks.begin(), marks.end());
  marks.erase(std::unique(marks.begin(), marks.end()), marks.end());
  AfpHistory h(d.size(), start);
  AfpRun out;
  auto next_mark = marks.begin();
  for (std::uint64_t i = 1; i <= n; ++i) {
    afp_step(h, d, rng);
    if (next_mark != marks.end() && *next_mark == i) {
      AfpCheckpoint c{i, h.estimate(), std::nullopt};
      if (reference) c.tv_to_reference = tv_distance(c.estimate, *reference);
      out.checkpoints.push_back(std::move(c));
      ++next_mark;
    }
  }
  out.estimate = h.estimate();
  out.steps = n;
  return out;
}

std::vector<std::uint64_t> doubling_checkpoints(std::uint64_t n, std::size_t k) {
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < k; ++i) {
    const std::uint64_t c = n >> i;
    if (c == 0) break;
    out.push_back(c);
  }
  std::reverse(out.begin(), out.end());
  return out;
}

}  // namespace qsd
