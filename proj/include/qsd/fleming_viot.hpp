#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "qsd/absorption.hpp"
#include "qsd/chain.hpp"
#include "qsd/fenwick.hpp"

namespace qsd {

/// Positions of N >= 2 particles in the non-absorbing states.
class ParticleConfig {
 public:
  explicit ParticleConfig(std::vector<State> positions);

  /// i.i.d. draws from `law`.
  static ParticleConfig sample_iid(const Distribution& law, std::size_t n, RngStream& rng);
  /// Deterministic configuration whose occupancy is the largest-remainder
  /// rounding of n * law.
  static ParticleConfig from_quota(const Distribution& law, std::size_t n);

  std::size_t size() const { return positions_.size(); }
  State operator[](std::size_t i) const { return positions_[i]; }
  std::span<const State> positions() const { return positions_; }
  /// m(., xi) = occupancy / N.
  Distribution empirical() const;

 private:
  std::vector<State> positions_;
};

struct FvEvent {
  double dt = 0.0;
  std::uint32_t particle = 0;
  State from = 0;
  State to = 0;
  bool revival = false;
};

/// Event-driven N-particle Fleming-Viot system. Particles jump with the
/// chain's rates; a particle that would be absorbed instead takes the
/// position of a uniformly chosen other particle.
///
/// Occupancy per state is indexed in a Fenwick tree weighted by
/// count(x) * r(x), so selecting the next particle costs O(log #states).
class FvSystem {
 public:
  FvSystem(const AbsorbedChainModel& model, const ParticleConfig& init);

  /// Performs one event. Throws DeadConfig when the total rate is zero.
  FvEvent step(RngStream& rng);

  double time() const { return time_; }
  std::size_t size() const { return positions_.size(); }
  State position(std::size_t i) const { return positions_[i]; }
  std::size_t count(State x) const;
  ParticleConfig config() const { return ParticleConfig(positions_); }
  Distribution empirical() const;
  void empirical_dense(std::size_t k, std::vector<double>& out) const;

  double aggregate_rate() const { return tree_.total(); }
  /// sum_i r(xi(i)) computed from scratch.
  double recomputed_rate() const;
  /// Throws if occupancy, particle lists or the rate index are inconsistent.
  void check_invariants() const;

  std::uint64_t events() const { return events_; }
  std::uint64_t revivals() const { return revivals_; }

  /// Time-integrated occupancy from `t0` on; read with occupation().
  void start_occupation(double t0);
  /// Occupancy integrated over [t0, t] divided by N (t - t0).
  Distribution occupation(double t) const;

 private:
  struct Slot {
    State state = 0;
    const Row* row = nullptr;
    double rate = 0.0;
    std::vector<std::uint32_t> members;
    double acc = 0.0;
    double last = 0.0;
  };

  std::size_t slot_of(State x);
  void move(std::uint32_t particle, State to);
  void settle(Slot& s, double t);

  RowCache rows_;
  std::vector<State> positions_;
  std::vector<std::uint32_t> slot_index_;   // particle -> slot
  std::vector<std::uint32_t> member_index_; // particle -> index in slot members
  std::vector<Slot> slots_;
  std::unordered_map<State, std::uint32_t> slot_by_state_;
  FenwickTree tree_;
  double time_ = 0.0;
  std::uint64_t events_ = 0;
  std::uint64_t revivals_ = 0;
  bool accumulating_ = false;
  double occupation_start_ = 0.0;
};

struct FvTrace {
  std::vector<double> times;
  std::vector<Distribution> measures;
  std::uint64_t events = 0;
  std::uint64_t revivals = 0;
};

/// Runs FV to `horizon`, recording m(., xi(t)) at t = 0, dt, 2 dt, ... and at
/// the horizon. Throws EventCapExceeded past `event_cap` events.
FvTrace fv_run(const AbsorbedChainModel& model, const ParticleConfig& init, double horizon,
               double grid_dt, RngStream& rng, std::uint64_t event_cap = kDefaultEventCap * 10);

/// Runs FV to `horizon` and returns only the final configuration.
ParticleConfig fv_final(const AbsorbedChainModel& model, const ParticleConfig& init,
                        double horizon, RngStream& rng,
                        std::uint64_t event_cap = kDefaultEventCap * 10);

struct StationaryOptions {
  Distribution init = Distribution::delta(1);
  std::uint64_t event_cap = kDefaultEventCap * 100;
};

/// Time average of m(., xi(t)) over (burn_in, horizon] from an i.i.d. start.
Distribution fv_stationary(const AbsorbedChainModel& model, std::size_t n, double burn_in,
                           double horizon, RngStream& rng, const StationaryOptions& options = {});

struct CorrelationEstimate {
  double covariance = 0.0;  // |E[m(x)m(y)] - E m(x) E m(y)|
  double standard_error = 0.0;
  double bound = 0.0;  // 2 exp(2 C0 t) / N
  double mean_x = 0.0;
  double mean_y = 0.0;
};

/// Monte Carlo estimate of the covariance of m(x, xi(t)) and m(y, xi(t))
/// from a fixed initial configuration, with the decorrelation bound.
CorrelationEstimate correlation_probe(const AbsorbedChainModel& model, const ParticleConfig& init,
                                      double t, State x, State y, std::size_t replicas,
                                      std::uint64_t seed);

}  // namespace qsd
