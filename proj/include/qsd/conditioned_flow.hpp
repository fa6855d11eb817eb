#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "qsd/chain.hpp"

namespace qsd {

/// theta = sum_x nu(x) q(x,0): the absorption rate of the chain started from nu.
double theta_of(const AbsorbedChainModel& model, const Distribution& nu);

struct ResidualVector {
  std::vector<std::pair<State, double>> entries;  // sorted by state
  double sup_norm = 0.0;

  double at(State x) const;
};

/// r(x) = sum_y q(y,x) mu(y) + theta_mu mu(x) over supp(mu) and its one-step
/// neighbourhood. Zero everywhere exactly when mu is quasi-stationary.
ResidualVector qsd_residual(const AbsorbedChainModel& model, const Distribution& mu);

/// Law of the chain conditioned on survival, sampled on a time grid. Masses
/// are dense on {1..K}.
class ConditionedPath {
 public:
  ConditionedPath(std::size_t k, std::vector<double> times, std::vector<std::vector<double>> masses)
      : k_(k), times_(std::move(times)), masses_(std::move(masses)) {}

  std::size_t truncation() const { return k_; }
  const std::vector<double>& times() const { return times_; }
  std::size_t size() const { return times_.size(); }
  double horizon() const { return times_.back(); }
  const std::vector<double>& dense(std::size_t i) const { return masses_[i]; }
  Distribution at_index(std::size_t i) const { return Distribution::from_dense(masses_[i]); }
  Distribution final() const { return at_index(size() - 1); }

  /// Piecewise-linear interpolation in t; throws PathTooShort past the horizon.
  void dense_at(double t, std::vector<double>& out) const;
  Distribution at(double t) const;

  double max_renormalization = 0.0;  // largest |sum - 1| before a renormalization
  double richardson_error = 0.0;     // half-step estimate on the last step

 private:
  std::size_t k_;
  std::vector<double> times_;
  std::vector<std::vector<double>> masses_;
};

struct FlowOptions {
  std::size_t record_stride = 1;   // keep every n-th step (the last is always kept)
  double leak_tolerance = 1e-6;    // mass allowed next to the truncation boundary
  double negative_tolerance = 1e-8;
};

/// RK4 integration of the conditioned forward equation
///   d/dt u(x) = sum_y q(y,x) u(y) + (sum_y q(y,0) u(y)) u(x)
/// on {1..K}, renormalized after each step. Requires h <= 0.1 / max rate
/// (StepUnstable otherwise); throws TruncationLeak when mass gathers next to
/// a truncation boundary.
ConditionedPath evolve_conditioned(const AbsorbedChainModel& model, const Distribution& mu,
                                   double horizon, double step, std::size_t k,
                                   const FlowOptions& options = {});

}  // namespace qsd
