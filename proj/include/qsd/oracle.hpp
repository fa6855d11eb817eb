#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "qsd/chain.hpp"
#include "qsd/model_zoo.hpp"

namespace qsd {

/// Principal left eigenpair of the sub-generator (or substochastic kernel).
struct QsdSolution {
  Distribution nu;
  double lambda = 0.0;  // continuous: negative eigenvalue of Q; discrete: Perron value of P
  double theta = 0.0;   // continuous: -lambda
  double residual = 0.0;
  std::size_t truncation = 0;
  std::size_t iterations = 0;
  std::vector<double> gap_log;  // TV between successive iterates
  bool minimal_candidate = false;
  std::string note;
};

struct PowerOptions {
  double tol = 1e-12;
  std::size_t max_iters = 20'000'000;
  bool keep_gap_log = false;
};

/// Left power iteration on M = I + Q/L (L = 1.05 max rate) over {1..K}.
/// lambda = L (rho - 1) with rho the Perron value of M. Stops when both the
/// TV step between normalized iterates and the eigenvalue drift drop below
/// tol. Throws NotIrreducible or NoConvergence.
QsdSolution solve_qsd_power(const AbsorbedChainModel& model, std::size_t k,
                            const PowerOptions& options = {});

/// Left Perron vector of the substochastic kernel: nu P = lambda nu.
QsdSolution solve_qsd_discrete(const DiscreteChainModel& d, const PowerOptions& options = {});

/// Max-norm of nu P - lambda nu.
double discrete_residual(const DiscreteChainModel& d, const Distribution& nu, double lambda);

/// Solves on the truncations in `schedule` until two consecutive solutions
/// are within `tol` in TV, and labels the result as the minimal-QSD
/// candidate. A finite model no larger than the first K is solved directly.
/// Throws NoStabilization when the schedule runs out.
QsdSolution minimal_qsd_reference(const AbsorbedChainModel& model,
                                  const std::vector<std::size_t>& schedule, double tol,
                                  const PowerOptions& options = {});

}  // namespace qsd
