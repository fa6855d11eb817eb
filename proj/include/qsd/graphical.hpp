#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <unordered_map>
#include <vector>

#include "qsd/chain.hpp"
#include "qsd/conditioned_flow.hpp"
#include "qsd/fenwick.hpp"
#include "qsd/fleming_viot.hpp"
#include "qsd/return_process.hpp"
#include "qsd/rng.hpp"

namespace qsd {

/// One ring of a particle's clocks. Internal rings (rate qbar) carry u;
/// voter rings (rate C0) carry (b, v).
struct Mark {
  double time = 0.0;
  bool voter = false;
  double u = 0.0;
  double b = 0.0;
  double v = 0.0;
};

/// Superposition of a particle's internal and voter Poisson processes, read
/// lazily from two independent streams.
class MarkStream {
 public:
  MarkStream(double qbar, double c0, RngStream internal, RngStream voter);

  const Mark& peek() const { return internal_.time <= voter_.time ? internal_ : voter_; }
  Mark pop();

 private:
  void draw_internal(double from);
  void draw_voter(double from);

  double qbar_;
  double c0_;
  RngStream internal_rng_;
  RngStream voter_rng_;
  Mark internal_;
  Mark voter_;
};

/// Fleming-Viot system driven by the graphical construction: particle i moves
/// at an internal ring to the y whose interval I(x, y) contains u, and at an
/// effective voter ring (b <= q(x,0)/C0) to the y whose interval J_i(y) of
/// the other particles' empirical law contains v. Intervals are laid out in
/// increasing state order. Requires finite qbar and C0.
///
/// Optionally couples particle 0 with the time-inhomogeneous tagged limit
/// driven by the same marks, with J replaced by the intervals of T_t mu.
class GraphicalFv {
 public:
  GraphicalFv(const AbsorbedChainModel& model, std::vector<State> positions, std::uint64_t seed,
              std::uint64_t replica);

  void attach_limit(const ConditionedPath& path, State y0);

  /// Applies every ring with time <= t.
  void advance_to(double t, std::uint64_t event_cap = kDefaultEventCap);

  double time() const { return time_; }
  std::size_t size() const { return positions_.size(); }
  const std::vector<State>& positions() const { return positions_; }
  std::size_t count(State x) const;
  Distribution empirical() const;
  /// sum_x |m(x, xi) - law(x)|, law dense on {1..K}.
  double l1_to(const std::vector<double>& law) const;

  std::uint64_t events() const { return events_; }
  const Trajectory& tagged() const { return tagged_; }
  const Trajectory& limit() const { return limit_; }
  bool diverged() const { return divergence_time_ < kInfinity; }
  double divergence_time() const { return divergence_time_; }

 private:
  struct Segment {
    State state;
    double upper;  // cumulative right end, in units of qbar
  };
  const std::vector<Segment>& internal_partition(State x);
  State internal_target(State x, double u);
  State voter_target(std::size_t i, double v);
  void place(State x, int delta);
  void apply(std::size_t i, const Mark& m);

  AbsorbedChainModel model_;
  RowCache rows_;
  double qbar_;
  double c0_;
  std::vector<State> positions_;
  std::vector<MarkStream> marks_;
  FenwickTree counts_;  // slot x-1 holds the number of particles at x
  std::unordered_map<State, std::vector<Segment>> partitions_;
  double time_ = 0.0;
  std::uint64_t events_ = 0;

  const ConditionedPath* path_ = nullptr;
  State y_ = 0;
  Trajectory tagged_;
  Trajectory limit_;
  double divergence_time_ = kInfinity;
};

struct CoupledRun {
  std::vector<double> grid;
  std::vector<double> deviation;  // sum_x |m(x, xi(s)) - T_s mu(x)| at grid times
  Trajectory tagged;
  Trajectory limit;
  bool psi = false;  // 1 once the tagged particle and the limit have split
  double divergence_time = kInfinity;
  Distribution final_empirical;
};

/// Runs the graphical FV system from i.i.d. mu (particle 0 and the limit share
/// their initial uniform) together with the coupled tagged limit.
/// Throws PathTooShort if horizon exceeds the path and Unsupported if qbar or
/// C0 is infinite.
CoupledRun coupled_tagged_run(const AbsorbedChainModel& model, const Distribution& mu,
                              const ConditionedPath& path, std::size_t n, double horizon,
                              double grid_dt, std::uint64_t seed, std::uint64_t replica,
                              std::uint64_t event_cap = kDefaultEventCap);

}  // namespace qsd
