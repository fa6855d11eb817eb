#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "qsd/distribution.hpp"
#include "qsd/model_zoo.hpp"
#include "qsd/rng.hpp"

namespace qsd {

/// Walker plus the counting measure of its history. Counts are 64-bit and
/// indexed by state, with a binary indexed tree for history draws.
class AfpHistory {
 public:
  static constexpr std::uint64_t kMassLimit = std::uint64_t{1} << 62;

  /// mu_0 = initial_mass * delta_start, walker at start.
  AfpHistory(std::size_t k, State start, std::uint64_t initial_mass = 1);

  State walker() const { return walker_; }
  std::uint64_t total() const { return total_; }
  std::uint64_t steps() const { return steps_; }
  std::uint64_t count(State x) const { return counts_[x - 1]; }
  /// mu_n / |mu_n|.
  Distribution estimate() const;

  /// State holding history slot `target` in [0, total), states in order.
  State history_at(std::uint64_t target) const;
  void record(State y);

 private:
  std::vector<std::uint64_t> counts_;
  std::vector<std::uint64_t> tree_;
  State walker_;
  std::uint64_t total_;
  std::uint64_t steps_ = 0;
};

/// One move: y ~ P(x, y) + P(x, 0) mu(y)/|mu|; then V = y and mu += delta_y.
State afp_step(AfpHistory& h, const DiscreteChainModel& d, RngStream& rng);

struct AfpCheckpoint {
  std::uint64_t n = 0;
  Distribution estimate;
  std::optional<double> tv_to_reference;
};

struct AfpRun {
  Distribution estimate;
  std::vector<AfpCheckpoint> checkpoints;
  std::uint64_t steps = 0;
};

/// n steps from mu_0 = delta_start. A checkpoint is recorded after every step
/// count listed in `checkpoints` (values above n are ignored).
AfpRun afp_run(const DiscreteChainModel& d, State start, std::uint64_t n, RngStream& rng,
               const std::vector<std::uint64_t>& checkpoints = {},
               const std::optional<Distribution>& reference = std::nullopt);

/// n/2^(k-1), ..., n/2, n.
std::vector<std::uint64_t> doubling_checkpoints(std::uint64_t n, std::size_t k);

}  // namespace qsd
