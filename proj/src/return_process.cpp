#include "qsd/return_process.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <map>

#include "qsd/error.hpp"
#include "qsd/format.hpp"

namespace qsd {

std::vector<Jump> ReturnRates::row(State x) const {
  const Row base = model_.row(x);
  std::map<State, double> rates;
  for (const Jump& j : base.jumps) rates[j.to] += j.rate;
  if (base.absorb > 0.0) {
    for (const auto& e : mu_) {
      if (e.state != x) rates[e.state] += base.absorb * e.mass;
    }
  }
  std::vector<Jump> out;
  for (const auto& [y, r] : rates) out.push_back({y, r});
  return out;
}

std::vector<Jump> TimeDepReturnRates::row(State x, double t) const {
  const Row base = model_.row(x);
  std::map<State, double> rates;
  for (const Jump& j : base.jumps) rates[j.to] += j.rate;
  if (base.absorb > 0.0) {
    std::vector<double> law;
    path_->dense_at(t, law);
    for (std::size_t i = 0; i < law.size(); ++i) {
      const auto y = static_cast<State>(i + 1);
      if (y != x && law[i] > 0.0) rates[y] += base.absorb * law[i];
    }
  }
  std::vector<Jump> out;
  for (const auto& [y, r] : rates) out.push_back({y, r});
  return out;
}

State sample_path_law(const ConditionedPath& path, double t, double u) {
  const auto& times = path.times();
  if (t < 0.0 || t > times.back() * (1.0 + 1e-12) + 1e-12) {
    fail(ErrorCode::kPathTooShort,
         "time " + format_double(t) + " beyond path horizon " + format_double(times.back()));
  }
  auto it = std::upper_bound(times.begin(), times.end(), t);
  std::size_t lo = 0, hi = 0;
  double w = 0.0;
  if (it == times.end()) {
    lo = hi = times.size() - 1;
  } else if (it != times.begin()) {
    hi = static_cast<std::size_t>(it - times.begin());
    lo = hi - 1;
    w = (t - times[lo]) / (times[hi] - times[lo]);
  }
  const auto& a = path.dense(lo);
  const auto& b = path.dense(hi);
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double m = (1.0 - w) * a[i] + w * b[i];
    if (m <= 0.0) continue;
    last_positive = i;
    acc += m;
    if (u < acc) return static_cast<State>(i + 1);
  }
  return static_cast<State>(last_positive + 1);
}

State Trajectory::at(double t) const {
  auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return states.front();
  return states[static_cast<std::size_t>(it - times.begin()) - 1];
}

MuReturnRun simulate_mu_return(const AbsorbedChainModel& model, const Distribution& mu,
                               double horizon, RngStream& rng, std::uint64_t event_cap,
                               bool keep_trajectory) {
  if (!(horizon > 0.0)) fail(ErrorCode::kInvalidArgument, "horizon must be positive");
  RowCache rows(model);
  std::map<State, double> occupation;
  Trajectory traj;
  State x = mu.sample(rng);
  double t = 0.0;
  traj.times.push_back(0.0);
  traj.states.push_back(x);
  for (;;) {
    const Row& r = rows.get(x);
    const double total = r.total();
    const double dt = total > 0.0 ? rng.exponential(total) : kInfinity;
    if (t + dt >= horizon) {
      occupation[x] += horizon - t;
      break;
    }
    if (traj.events >= event_cap) {
      fail(ErrorCode::kEventCapExceeded, "mu-return run passed " + std::to_string(event_cap) + " events");
    }
    occupation[x] += dt;
    t += dt;
    ++traj.events;
    State next = pick_move(r, rng.uniform() * total);
    if (next == kAbsorbing) {
      ++traj.returns;
      next = mu.sample(rng);
      if (next == x) {
        ++traj.null_events;
        continue;
      }
    }
    x = next;
    if (keep_trajectory) {
      traj.times.push_back(t);
      traj.states.push_back(x);
    }
  }
  std::vector<Distribution::Entry> w;
  for (const auto& [s, time] : occupation) w.push_back({s, time});
  return {Distribution::from_weights(std::move(w)), std::move(traj)};
}

namespace {

bool return_chain_irreducible(const AbsorbedChainModel& m, const Distribution& mu, std::size_t n) {
  std::vector<std::vector<State>> fwd(n + 1), bwd(n + 1);
  std::vector<State> mu_support;
  for (const auto& e : mu) {
    if (e.state <= n) mu_support.push_back(e.state);
  }
  for (std::size_t x = 1; x <= n; ++x) {
    const Row* r = m.finite_row(static_cast<State>(x));
    auto add = [&](State y) {
      fwd[x].push_back(y);
      bwd[y].push_back(static_cast<State>(x));
    };
    for (const Jump& j : r->jumps) {
      if (j.rate > 0.0) add(j.to);
    }
    if (r->absorb > 0.0) {
      for (State y : mu_support) add(y);
    }
  }
  auto all = [n](const std::vector<std::vector<State>>& adj) {
    std::vector<char> seen(n + 1, 0);
    std::vector<State> stack{1};
    seen[1] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
      State s = stack.back();
      stack.pop_back();
      for (State t : adj[s]) {
        if (!seen[t]) {
          seen[t] = 1;
          ++count;
          stack.push_back(t);
        }
      }
    }
    return count == n;
  };
  return all(fwd) && all(bwd);
}

}  // namespace

Distribution phi_map(const AbsorbedChainModel& model, const Distribution& mu,
                     const PhiOptions& options) {
  const auto k = model.num_states();
  if (!k) fail(ErrorCode::kUnsupported, "phi_map needs a finite model");
  const std::size_t n = *k;
  if (mu.max_state() > n) fail(ErrorCode::kInvalidArgument, "mu charges states outside the model");
  if (!return_chain_irreducible(model, mu, n)) {
    fail(ErrorCode::kNotIrreducible, "the mu-return chain is reducible");
  }
  if (n > options.direct_limit) {
    RngStream rng(options.fallback_seed, {static_cast<std::uint64_t>(Purpose::kReturn)});
    return simulate_mu_return(model, mu, options.fallback_horizon, rng).occupation;
  }

  // Renewal identity: the invariant law of the return chain is the expected
  // occupation before absorption from mu, normalized: solve (-Q)^T w = mu.
  std::vector<Eigen::Triplet<double>> triplets;
  double total_absorb = 0.0;
  for (std::size_t x = 1; x <= n; ++x) {
    const Row* r = model.finite_row(static_cast<State>(x));
    total_absorb += r->absorb;
    triplets.emplace_back(x - 1, x - 1, r->total());
    for (const Jump& j : r->jumps) triplets.emplace_back(j.to - 1, x - 1, -j.rate);
  }
  if (!(total_absorb > 0.0)) fail(ErrorCode::kInvalidArgument, "model never absorbs");
  Eigen::SparseMatrix<double> a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  a.setFromTriplets(triplets.begin(), triplets.end());
  a.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) fail(ErrorCode::kNotIrreducible, "(-Q) is singular");
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (const auto& e : mu) rhs[e.state - 1] = e.mass;
  const Eigen::VectorXd w = lu.solve(rhs);
  std::vector<double> weights(w.data(), w.data() + n);
  for (double& v : weights) v = std::max(0.0, v);
  return Distribution::from_dense(weights);
}

double return_stationarity_residual(const AbsorbedChainModel& model, const Distribution& mu,
                                    const Distribution& pi) {
  const ReturnRates rr(model, mu);
  std::map<State, double> flow;
  for (const auto& e : pi) {
    double out_rate = 0.0;
    for (const Jump& j : rr.row(e.state)) {
      flow[j.to] += e.mass * j.rate;
      out_rate += j.rate;
    }
    flow[e.state] -= e.mass * out_rate;
  }
  double worst = 0.0;
  for (const auto& [y, f] : flow) worst = std::max(worst, std::abs(f));
  return worst;
}

PhiIteration phi_iterate(const AbsorbedChainModel& model, const Distribution& mu0,
                         std::size_t max_iters, double tol, const PhiOptions& options) {
  PhiIteration out;
  Distribution mu = mu0;
  for (std::size_t it = 0; it < max_iters; ++it) {
    Distribution next = phi_map(model, mu, options);
    const double tv = tv_distance(next, mu);
    out.tv_log.push_back(tv);
    mu = std::move(next);
    if (tv < tol) {
      out.converged = true;
      break;
    }
  }
  out.result = std::move(mu);
  return out;
}

Trajectory simulate_tagged_limit(const AbsorbedChainModel& model, const ConditionedPath& path,
                                 State y0, double horizon, RngStream& rng,
                                 std::uint64_t event_cap) {
  if (horizon > path.horizon() * (1.0 + 1e-12)) {
    fail(ErrorCode::kPathTooShort, "horizon " + format_double(horizon) + " beyond path horizon " +
                                       format_double(path.horizon()));
  }
  if (!model.bounds().c0 || std::isinf(*model.bounds().c0)) {
    fail(ErrorCode::kUnsupported, "tagged limit needs a finite absorption-rate bound C0");
  }
  RowCache rows(model);
  Trajectory traj;
  traj.times.push_back(0.0);
  traj.states.push_back(y0);
  State x = y0;
  double t = 0.0;
  for (;;) {
    const Row& r = rows.get(x);
    const double total = r.total();
    if (!(total > 0.0)) break;
    const double dt = rng.exponential(total);
    if (t + dt > horizon) break;
    if (traj.events >= event_cap) {
      fail(ErrorCode::kEventCapExceeded, "tagged run passed " + std::to_string(event_cap) + " events");
    }
    t += dt;
    ++traj.events;
    State next = pick_move(r, rng.uniform() * total);
    if (next == kAbsorbing) {
      ++traj.returns;
      next = sample_path_law(path, t, rng.uniform());
    }
    if (next == x) {
      ++traj.null_events;
      continue;
    }
    x = next;
    traj.times.push_back(t);
    traj.states.push_back(x);
  }
  return traj;
}

}  // namespace qsd
