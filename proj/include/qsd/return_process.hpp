#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "qsd/absorption.hpp"
#include "qsd/chain.hpp"
#include "qsd/conditioned_flow.hpp"

namespace qsd {

/// Rates of the mu-return chain: q^mu(x,y) = q(x,y) + q(x,0) mu(y), x != y.
/// The self-return mass q(x,0) mu(x) is a null event and is not listed.
class ReturnRates {
 public:
  ReturnRates(AbsorbedChainModel model, Distribution mu)
      : model_(std::move(model)), mu_(std::move(mu)) {}

  std::vector<Jump> row(State x) const;
  const AbsorbedChainModel& model() const { return model_; }
  const Distribution& mu() const { return mu_; }

 private:
  AbsorbedChainModel model_;
  Distribution mu_;
};

/// Time-dependent return rates q(x,y) + q(x,0) T_t mu(y) read off a path.
class TimeDepReturnRates {
 public:
  TimeDepReturnRates(AbsorbedChainModel model, const ConditionedPath& path)
      : model_(std::move(model)), path_(&path) {}

  std::vector<Jump> row(State x, double t) const;

 private:
  AbsorbedChainModel model_;
  const ConditionedPath* path_;
};

/// State y with u in [F(y-), F(y)) for the interpolated law T_t mu, states in
/// increasing order. Throws PathTooShort past the horizon.
State sample_path_law(const ConditionedPath& path, double t, double u);

struct Trajectory {
  std::vector<double> times;  // jump times, times[0] = 0
  std::vector<State> states;  // state entered at times[i]
  std::uint64_t events = 0;
  std::uint64_t null_events = 0;  // returns to the state just left
  std::uint64_t returns = 0;

  State at(double t) const;
};

struct MuReturnRun {
  Distribution occupation;  // time-weighted over [0, horizon]
  Trajectory trajectory;
};

/// Gillespie run of the mu-return chain from a draw of mu. Absorption
/// attempts restart the walk from a fresh draw of mu.
MuReturnRun simulate_mu_return(const AbsorbedChainModel& model, const Distribution& mu,
                               double horizon, RngStream& rng,
                               std::uint64_t event_cap = kDefaultEventCap * 10,
                               bool keep_trajectory = false);

struct PhiOptions {
  std::size_t direct_limit = 10'000;  // beyond this K, estimate by simulation
  double fallback_horizon = 1e4;
  std::uint64_t fallback_seed = 0;
};

/// Invariant law of the mu-return chain on a finite model. Up to
/// `direct_limit` states this is the exact sparse solve
/// pi proportional to mu (-Q)^{-1} (expected occupation before absorption);
/// larger models fall back to a simulated occupation measure.
/// Throws NotIrreducible when the return chain is reducible.
Distribution phi_map(const AbsorbedChainModel& model, const Distribution& mu,
                     const PhiOptions& options = {});

/// max_y |sum_x pi(x) q^mu(x,y)|, the stationarity defect of pi for q^mu.
double return_stationarity_residual(const AbsorbedChainModel& model, const Distribution& mu,
                                    const Distribution& pi);

struct PhiIteration {
  Distribution result;
  std::vector<double> tv_log;  // TV(mu_{k+1}, mu_k)
  bool converged = false;
};

/// mu_{k+1} = Phi(mu_k) until the TV step drops below tol. Not converging
/// within max_iters is reported through `converged`, not thrown.
PhiIteration phi_iterate(const AbsorbedChainModel& model, const Distribution& mu0,
                         std::size_t max_iters, double tol, const PhiOptions& options = {});

/// Time-inhomogeneous tagged-particle limit: base jumps as usual, absorption
/// attempts return to a draw of T_t mu at the current time.
/// Throws PathTooShort if horizon exceeds the path, Unsupported if C0 is infinite.
Trajectory simulate_tagged_limit(const AbsorbedChainModel& model, const ConditionedPath& path,
                                 State y0, double horizon, RngStream& rng,
                                 std::uint64_t event_cap = kDefaultEventCap);

}  // namespace qsd
