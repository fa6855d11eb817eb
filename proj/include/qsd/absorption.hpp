#pragma once

#include <cstdint>

#include "qsd/chain.hpp"

namespace qsd {

inline constexpr std::uint64_t kDefaultEventCap = 10'000'000;

struct AbsorptionSample {
  double tau = 0.0;
  State exit_state = 0;  // last state before the jump to 0
  std::uint64_t jumps = 0;
};

/// Gillespie run of the raw chain from a state drawn from `start` until
/// absorption. Throws EventCapExceeded after `event_cap` jumps, or when the
/// walk reaches a state with zero total rate (it would never be absorbed).
AbsorptionSample simulate_until_absorption(const AbsorbedChainModel& model,
                                           const Distribution& start, RngStream& rng,
                                           std::uint64_t event_cap = kDefaultEventCap);

/// Picks the next move from `row` given u uniform on [0, row.total()).
/// Returns kAbsorbing for the absorption slot. Jumps come first in list order.
State pick_move(const Row& row, double u);

}  // namespace qsd
