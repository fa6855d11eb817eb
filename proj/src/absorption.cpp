#include "qsd/absorption.hpp"

#include <string>

#include "qsd/error.hpp"

namespace qsd {

State pick_move(const Row& row, double u) {
  for (const Jump& j : row.jumps) {
    if (u < j.rate) return j.to;
    u -= j.rate;
  }
  if (row.absorb > 0.0) return kAbsorbing;
  // Rounding pushed u past the end: take the last positive slot.
  for (auto it = row.jumps.rbegin(); it != row.jumps.rend(); ++it) {
    if (it->rate > 0.0) return it->to;
  }
  return kAbsorbing;
}

AbsorptionSample simulate_until_absorption(const AbsorbedChainModel& model,
                                           const Distribution& start, RngStream& rng,
                                           std::uint64_t event_cap) {
  if (event_cap == 0) fail(ErrorCode::kInvalidArgument, "event_cap must be positive");
  RowCache rows(model);
  AbsorptionSample out;
  State x = start.sample(rng);
  for (;;) {
    const Row& r = rows.get(x);
    const double total = r.total();
    if (!(total > 0.0)) {
      fail(ErrorCode::kEventCapExceeded,
           "state " + std::to_string(x) + " has zero total rate; absorption impossible");
    }
    if (out.jumps >= event_cap) {
      fail(ErrorCode::kEventCapExceeded, "no absorption after " + std::to_string(event_cap) + " jumps");
    }
    out.tau += rng.exponential(total);
    ++out.jumps;
    const State next = pick_move(r, rng.uniform() * total);
    if (next == kAbsorbing) {
      out.exit_state = x;
      return out;
    }
    x = next;
  }
}

}  // namespace qsd
