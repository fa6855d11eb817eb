#include "qsd/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "qsd/conditioned_flow.hpp"
#include "qsd/error.hpp"
#include "qsd/format.hpp"

namespace qsd {
namespace {

struct SparseKernel {
  std::size_t n = 0;
  std::vector<double> hold;                                           // M(x,x)
  std::vector<std::vector<std::pair<std::size_t, double>>> incoming;  // (x, M(x,y)) for y

  /// out = v M.
  void left_apply(const std::vector<double>& v, std::vector<double>& out) const {
    for (std::size_t y = 0; y < n; ++y) {
      double s = hold[y] * v[y];
      for (const auto& [x, p] : incoming[y]) s += p * v[x];
      out[y] = s;
    }
  }
};

struct PowerResult {
  std::vector<double> v;
  double rho = 0.0;
  std::size_t iterations = 0;
  std::vector<double> gaps;
};

PowerResult power_iterate(const SparseKernel& m, const PowerOptions& opt) {
  PowerResult res;
  res.v.assign(m.n, 1.0 / static_cast<double>(m.n));
  std::vector<double> w(m.n);
  double prev_rho = -1.0;
  double last_gap = 0.0;
  for (std::size_t it = 1; it <= opt.max_iters; ++it) {
    m.left_apply(res.v, w);
    double rho = 0.0;
    for (double x : w) rho += x;
    if (!(rho > 0.0)) fail(ErrorCode::kNoConvergence, "iterate vanished");
    double gap = 0.0;
    for (std::size_t i = 0; i < m.n; ++i) {
      w[i] /= rho;
      gap += std::abs(w[i] - res.v[i]);
    }
    gap *= 0.5;
    res.v.swap(w);
    res.rho = rho;
    res.iterations = it;
    last_gap = gap;
    if (opt.keep_gap_log) res.gaps.push_back(gap);
    if (gap < opt.tol && std::abs(rho - prev_rho) < opt.tol) return res;
    prev_rho = rho;
  }
  fail(ErrorCode::kNoConvergence, "power iteration did not converge in " +
                                      std::to_string(opt.max_iters) + " iterations (last gap " +
                                      format_double(last_gap) + ")");
}

}  // namespace

QsdSolution solve_qsd_power(const AbsorbedChainModel& model, std::size_t k,
                            const PowerOptions& options) {
  if (k == 0) fail(ErrorCode::kInvalidArgument, "K must be positive");
  const AbsorbedChainModel m = model.restricted(k);
  const std::size_t n = *m.num_states();
  if (!is_irreducible(m)) fail(ErrorCode::kNotIrreducible, "restriction to {1.." + std::to_string(n) + "} is reducible");
  const double rate = kUniformizationSlack * m.max_total_rate(n);
  if (!(rate > 0.0)) fail(ErrorCode::kNotIrreducible, "all rates vanish");

  SparseKernel kernel;
  kernel.n = n;
  kernel.hold.resize(n);
  kernel.incoming.resize(n);
  for (std::size_t x = 1; x <= n; ++x) {
    const Row* r = m.finite_row(static_cast<State>(x));
    kernel.hold[x - 1] = 1.0 - r->total() / rate;
    for (const Jump& j : r->jumps) kernel.incoming[j.to - 1].push_back({x - 1, j.rate / rate});
  }
  PowerResult pr = power_iterate(kernel, options);

  QsdSolution sol;
  sol.nu = Distribution::from_dense(pr.v);
  sol.lambda = rate * (pr.rho - 1.0);
  sol.theta = -sol.lambda;
  sol.residual = qsd_residual(m, sol.nu).sup_norm;
  sol.truncation = n;
  sol.iterations = pr.iterations;
  sol.gap_log = std::move(pr.gaps);
  return sol;
}

QsdSolution solve_qsd_discrete(const DiscreteChainModel& d, const PowerOptions& options) {
  const std::size_t n = d.size();
  if (n == 0) fail(ErrorCode::kInvalidArgument, "empty kernel");
  if (!is_irreducible(d)) fail(ErrorCode::kNotIrreducible, "kernel is reducible");
  if (const std::size_t p = period(d); p != 1) {
    fail(ErrorCode::kNoConvergence, "kernel has period " + std::to_string(p) +
                                        "; power iteration cannot converge");
  }
  SparseKernel kernel;
  kernel.n = n;
  kernel.hold.assign(n, 0.0);
  kernel.incoming.resize(n);
  for (std::size_t x = 1; x <= n; ++x) {
    for (const auto& e : d.rows[x - 1]) {
      if (e.to == x) {
        kernel.hold[x - 1] = e.p;
      } else {
        kernel.incoming[e.to - 1].push_back({x - 1, e.p});
      }
    }
  }
  PowerResult pr = power_iterate(kernel, options);
  QsdSolution sol;
  sol.nu = Distribution::from_dense(pr.v);
  sol.lambda = pr.rho;
  sol.theta = 1.0 - pr.rho;
  sol.residual = discrete_residual(d, sol.nu, sol.lambda);
  sol.truncation = n;
  sol.iterations = pr.iterations;
  sol.gap_log = std::move(pr.gaps);
  return sol;
}

double discrete_residual(const DiscreteChainModel& d, const Distribution& nu, double lambda) {
  std::vector<double> out(d.size(), 0.0);
  for (const auto& e : nu) {
    for (const auto& t : d.rows.at(e.state - 1)) out[t.to - 1] += e.mass * t.p;
  }
  double worst = 0.0;
  for (std::size_t y = 0; y < d.size(); ++y) {
    worst = std::max(worst, std::abs(out[y] - lambda * nu.mass(static_cast<State>(y + 1))));
  }
  return worst;
}

QsdSolution minimal_qsd_reference(const AbsorbedChainModel& model,
                                  const std::vector<std::size_t>& schedule, double tol,
                                  const PowerOptions& options) {
  if (schedule.empty()) fail(ErrorCode::kInvalidArgument, "empty truncation schedule");
  const auto full = model.num_states();
  if (full && *full <= schedule.front()) {
    QsdSolution sol = solve_qsd_power(model, *full, options);
    sol.minimal_candidate = true;
    sol.note = "finite state space: unique QSD";
    return sol;
  }
  QsdSolution prev = solve_qsd_power(model, schedule.front(), options);
  for (std::size_t i = 1; i < schedule.size(); ++i) {
    QsdSolution cur = solve_qsd_power(model, schedule[i], options);
    const double tv = tv_distance(prev.nu, cur.nu);
    if (tv < tol) {
      cur.minimal_candidate = true;
      cur.note = "truncation limit taken as the minimal QSD (K=" + std::to_string(prev.truncation) +
                 "->" + std::to_string(cur.truncation) + ", TV " + format_double(tv) + ")";
      return cur;
    }
    prev = std::move(cur);
  }
  fail(ErrorCode::kNoStabilization, "truncation schedule exhausted before TV < " + format_double(tol));
}

}  // namespace qsd
