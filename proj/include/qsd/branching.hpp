#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "qsd/chain.hpp"
#include "qsd/rng.hpp"

namespace qsd {

/// Mean offspring matrix m(x,y) = q(x,y) + (alpha + 1) 1{x=y} on {1..K}.
struct ShiftedMeanMatrix {
  struct Entry {
    State to;
    double mean;
  };
  double alpha = 0.0;
  std::vector<std::vector<Entry>> rows;  // rows[x-1], nonzero means only
  /// True when lambda + alpha > 0 is certified: alpha > C0 (since -lambda <= C0),
  /// or the power-iteration eigenvalue confirms it.
  bool supercritical = false;
  std::optional<double> lambda_alpha;  // set when an eigen-solve was needed

  std::size_t size() const { return rows.size(); }
  double at(State x, State y) const;
};

/// With no alpha: alpha = max |q(x,x)|, bumped by 1 unless it exceeds C0.
/// Throws NegativeMean when a supplied alpha leaves a negative diagonal mean.
ShiftedMeanMatrix build_shifted(const AbsorbedChainModel& finite_model,
                                std::optional<double> alpha = std::nullopt);

class BranchingPopulation {
 public:
  BranchingPopulation(std::size_t k, State founder, std::uint64_t cap);

  std::uint64_t count(State x) const { return counts_[x - 1]; }
  std::uint64_t total() const { return total_; }
  std::uint64_t cap() const { return cap_; }
  double time() const { return time_; }
  bool extinct() const { return total_ == 0; }
  std::uint64_t cap_events() const { return cap_events_; }
  std::vector<double> proportions() const;

  /// Exp(|X|) wait, a uniform individual reproduces with independent
  /// Poisson(m(x,y)) offspring of each type, then a multinomial down-sample
  /// to cap/2 if the total passed the cap. Returns false once extinct.
  bool step(const ShiftedMeanMatrix& sm, RngStream& rng);

  /// Multinomial down-sample of the current population to `target` (exposed
  /// for testing).
  void downsample(std::uint64_t target, RngStream& rng);

 private:
  void add(State x, std::int64_t delta);
  State pick(double target) const;

  std::vector<std::uint64_t> counts_;
  std::vector<double> tree_;
  std::uint64_t total_ = 0;
  std::uint64_t cap_;
  double time_ = 0.0;
  std::uint64_t cap_events_ = 0;
};

/// Least-squares slope of log|X| over the window starting when |X| first
/// reaches `from_size` and ending at the first cap event.
struct GrowthFit {
  double slope = 0.0;
  std::size_t points = 0;
};

struct KsOptions {
  std::optional<double> alpha;  // auto when empty
  double horizon = 15.0;
  std::uint64_t cap = 100'000;
  std::size_t replicas = 50;
  std::size_t restarts = 20;
  State founder = 1;
  double sample_dt = 0.05;
  std::uint64_t fit_from = 100;
};

struct KsEstimate {
  Distribution nu_hat;
  double alpha = 0.0;
  std::size_t survivors = 0;
  std::size_t attempts = 0;
  double survival_fraction = 0.0;
  std::optional<double> growth_rate_fit;  // mean over survivors with a usable window
  std::optional<double> theta_hat;        // alpha - growth_rate_fit
  std::uint64_t cap_events = 0;
};

/// Throws AllExtinct when no replica survives, InvalidArgument when the
/// shifted process is not certified supercritical.
KsEstimate ks_estimate(const AbsorbedChainModel& finite_model, const KsOptions& options,
                       std::uint64_t seed);

}  // namespace qsd
