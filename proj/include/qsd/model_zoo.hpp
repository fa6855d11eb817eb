#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "qsd/chain.hpp"

namespace qsd {

/// Birth-death rates p(x) = up + up_per_x * x, q(x) = down + down_per_x * x.
/// The down move from 1 is absorption.
struct BirthDeathSpec {
  double up = 0.0;
  double up_per_x = 0.0;
  double down = 0.0;
  double down_per_x = 0.0;

  static BirthDeathSpec constant(double p, double q) { return {p, 0.0, q, 0.0}; }
  double up_rate(State x) const { return up + up_per_x * x; }
  double down_rate(State x) const { return down + down_per_x * x; }
};

/// Binary-split / death population chain: q(n,n+1) = b n, q(n,n-1) = d n.
struct GaltonWatsonSpec {
  double split = 1.0;
  double death = 2.0;
};

/// Substochastic kernel on {1..K} with its kill column.
struct DiscreteChainModel {
  struct Entry {
    State to;
    double p;
  };
  std::vector<std::vector<Entry>> rows;  // rows[x-1], includes the diagonal
  std::vector<double> kill;              // kill[x-1] = P(x, 0)

  std::size_t size() const { return rows.size(); }
  double at(State x, State y) const;
};

/// Lambda = {1}, q(1,0) = 1.
AbsorbedChainModel point_model();
/// Lambda = {1,2}, q(1,2) = q(2,1) = q(1,0) = 1.
AbsorbedChainModel two_state_model();

/// rates[x-1][y-1] is q(x,y); absorb[x-1] is q(x,0). Diagonal entries must be
/// zero (SelfLoop otherwise) and all rates nonnegative (NegativeRate).
AbsorbedChainModel build_finite(const std::vector<std::vector<double>>& rates,
                                const std::vector<double>& absorb, std::string name = "finite");

/// Finite on {1..K} when `k` is given (up-jump at K dropped), lazy otherwise.
AbsorbedChainModel build_birth_death(const BirthDeathSpec& spec, std::optional<std::size_t> k,
                                     std::string name = "bd");

/// Throws SupercriticalSpec unless split < death.
AbsorbedChainModel build_galton_watson(const GaltonWatsonSpec& spec);

/// P = I + Q/rate on {1..K}, kill = q(x,0)/rate. Throws RateTooSmall when
/// rate is below the largest total rate.
DiscreteChainModel uniformize(const AbsorbedChainModel& finite_model, double rate);
/// Uses rate = 1.05 * max total rate.
DiscreteChainModel uniformize(const AbsorbedChainModel& finite_model);
inline constexpr double kUniformizationSlack = 1.05;

/// Period of an irreducible discrete kernel (1 means aperiodic).
std::size_t period(const DiscreteChainModel& d);
bool is_irreducible(const DiscreteChainModel& d);

/// Parses the builtin names `point`, `two-state`, `bd:p,q[,K]`, `gw:b,d` and
/// `file:<path>`.
AbsorbedChainModel model_from_spec(const std::string& spec);

}  // namespace qsd
