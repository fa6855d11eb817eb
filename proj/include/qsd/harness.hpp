#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qsd/chain.hpp"
#include "qsd/config.hpp"
#include "qsd/distribution.hpp"

namespace qsd {

struct RatePoint {
  double n = 0.0;
  double error = 0.0;
};

/// Least squares of log(error) on log(n).
struct RateFit {
  std::vector<RatePoint> points;
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // RMS of the log residuals
};

/// Throws DegenerateInput with fewer than 2 distinct n or a nonpositive error.
RateFit rate_fit(const std::vector<RatePoint>& points);

struct ScanPoint {
  std::size_t n = 0;
  double mean_abs_error = 0.0;  // replica mean of |m(x, xi(T)) - T_T mu(x)|
  double standard_error = 0.0;
  double bias = 0.0;            // |replica mean of m(x, xi(T)) - T_T mu(x)|
  double bias_standard_error = 0.0;
};

struct ScanResult {
  double reference = 0.0;  // T_T mu(x) from the conditioned flow
  std::vector<ScanPoint> points;
  std::optional<RateFit> fit;  // empty when the errors vanish (e.g. one state)
};

struct ScanOptions {
  std::vector<std::size_t> particles = {50, 200, 800};
  double horizon = 1.0;
  State state = 1;
  std::size_t replicas = 200;
  std::size_t trunc = 200;  // for the reference flow on infinite models
  double dt = 1e-3;
};

/// Fixed-time FV error against the conditioned flow for several N, started
/// from the largest-remainder configuration of mu; fits the error decay.
ScanResult fv_scan(const AbsorbedChainModel& model, const Distribution& mu, const ScanOptions& options,
                   std::uint64_t seed);

struct MethodResult {
  std::string method;
  std::optional<double> tv_to_oracle;
  double runtime_seconds = 0.0;
  std::string status = "ok";
};

struct ReportBudget {
  std::size_t trunc = 200;
  std::size_t particles = 800;
  double burn_in = 20.0;
  double horizon = 220.0;
  std::size_t phi_iters = 200;
  double phi_tol = 1e-10;
  std::uint64_t afp_steps = 1'000'000;
  double branch_horizon = 15.0;
  std::uint64_t branch_cap = 100'000;
  std::size_t branch_replicas = 50;
  bool branch = true;
};

/// Runs the oracle, stationary FV, Phi iteration, AFP and the branching
/// estimator on one finite model (infinite models are truncated at
/// budget.trunc) and reports each method's TV distance to the oracle.
/// Failing methods are recorded, not thrown.
std::vector<MethodResult> cross_method_report(const AbsorbedChainModel& model, const ReportBudget& budget,
                                              std::uint64_t seed);

/// Sample autocorrelation of xs at the given lag (0 when undefined).
double lag_autocorrelation(const std::vector<double>& xs, std::size_t lag);

struct RunRecord {
  std::vector<std::string> data_files;  // deterministic payloads
  std::string summary_file;             // wall time and other run facts
  double wall_seconds = 0.0;
};

/// Validates, dispatches to the method and writes `<stem>.csv` / `<stem>.json`
/// (plus a `<stem>.gp` plot script for some methods) atomically under out_dir,
/// then the `<stem>.summary.json` sidecar. Identical configs give
/// byte-identical data files.
RunRecord run_config(const ExperimentConfig& cfg, const std::string& out_dir);

}  // namespace qsd
