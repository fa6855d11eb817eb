#include "qsd/conditioned_flow.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "qsd/error.hpp"
#include "qsd/format.hpp"

namespace qsd {

double theta_of(const AbsorbedChainModel& model, const Distribution& nu) {
  double theta = 0.0;
  for (const auto& e : nu) theta += e.mass * model.absorb_rate(e.state);
  return theta;
}

double ResidualVector::at(State x) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), x,
                             [](const auto& e, State s) { return e.first < s; });
  return (it != entries.end() && it->first == x) ? it->second : 0.0;
}

ResidualVector qsd_residual(const AbsorbedChainModel& model, const Distribution& mu) {
  const double theta = theta_of(model, mu);
  std::map<State, double> r;
  Row row;
  for (const auto& e : mu) {
    model.row(e.state, row);
    r[e.state] += (theta - row.total()) * e.mass;
    for (const Jump& j : row.jumps) r[j.to] += j.rate * e.mass;
  }
  ResidualVector out;
  out.entries.assign(r.begin(), r.end());
  for (const auto& [x, v] : out.entries) out.sup_norm = std::max(out.sup_norm, std::abs(v));
  return out;
}

void ConditionedPath::dense_at(double t, std::vector<double>& out) const {
  if (t < 0.0 || t > times_.back() * (1.0 + 1e-12) + 1e-12) {
    fail(ErrorCode::kPathTooShort,
         "time " + format_double(t) + " beyond path horizon " + format_double(times_.back()));
  }
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  if (it == times_.end()) {
    out = masses_.back();
    return;
  }
  const auto hi = static_cast<std::size_t>(it - times_.begin());
  if (hi == 0) {
    out = masses_.front();
    return;
  }
  const std::size_t lo = hi - 1;
  const double w = (t - times_[lo]) / (times_[hi] - times_[lo]);
  out.resize(k_);
  for (std::size_t i = 0; i < k_; ++i) out[i] = (1.0 - w) * masses_[lo][i] + w * masses_[hi][i];
}

Distribution ConditionedPath::at(double t) const {
  std::vector<double> d;
  dense_at(t, d);
  return Distribution::from_dense(d);
}

namespace {

/// Sparse transposed generator of the truncated model.
struct FlowOperator {
  std::size_t k;
  std::vector<double> diag;    // q(x,x)
  std::vector<double> absorb;  // q(x,0)
  std::vector<std::vector<std::pair<std::size_t, double>>> incoming;  // (y, q(y,x)), y != x

  void apply(const std::vector<double>& u, std::vector<double>& du) const {
    double killed = 0.0;
    for (std::size_t y = 0; y < k; ++y) killed += absorb[y] * u[y];
    for (std::size_t x = 0; x < k; ++x) {
      double s = diag[x] * u[x];
      for (const auto& [y, q] : incoming[x]) s += q * u[y];
      du[x] = s + killed * u[x];
    }
  }
};

}  // namespace

ConditionedPath evolve_conditioned(const AbsorbedChainModel& model, const Distribution& mu,
                                   double horizon, double step, std::size_t k,
                                   const FlowOptions& options) {
  if (!(horizon > 0.0)) fail(ErrorCode::kInvalidArgument, "horizon must be positive");
  if (!(step > 0.0)) fail(ErrorCode::kInvalidArgument, "step must be positive");
  if (k == 0) fail(ErrorCode::kInvalidArgument, "truncation must be positive");
  if (mu.max_state() > k) {
    fail(ErrorCode::kInvalidArgument, "initial law charges states beyond K=" + std::to_string(k));
  }
  const auto full_k = model.num_states();
  const bool truncating = !full_k || *full_k > k;
  const std::size_t n_states = truncating ? k : *full_k;
  const AbsorbedChainModel m = model.restricted(n_states);

  FlowOperator op{n_states, std::vector<double>(n_states), std::vector<double>(n_states),
                  std::vector<std::vector<std::pair<std::size_t, double>>>(n_states)};
  double max_rate = 0.0;
  for (std::size_t x = 1; x <= n_states; ++x) {
    const Row* r = m.finite_row(static_cast<State>(x));
    op.diag[x - 1] = -r->total();
    op.absorb[x - 1] = r->absorb;
    max_rate = std::max(max_rate, r->total());
    for (const Jump& j : r->jumps) op.incoming[j.to - 1].push_back({x - 1, j.rate});
  }
  if (max_rate > 0.0 && step > 0.1 / max_rate * (1.0 + 1e-12)) {
    fail(ErrorCode::kStepUnstable, "step " + format_double(step) + " exceeds 0.1 / max rate = " +
                                       format_double(0.1 / max_rate));
  }

  // States within one jump of a boundary the truncation cut through.
  std::vector<char> near_boundary(n_states, 0);
  if (truncating) {
    Row full;
    std::set<std::size_t> edge;
    for (std::size_t x = 1; x <= n_states; ++x) {
      model.row(static_cast<State>(x), full);
      for (const Jump& j : full.jumps) {
        if (j.to > n_states && j.rate > 0.0) edge.insert(x - 1);
      }
    }
    for (std::size_t x : edge) near_boundary[x] = 1;
    for (std::size_t x : edge) {
      for (const auto& [y, q] : op.incoming[x]) {
        if (q > 0.0) near_boundary[y] = 1;
      }
    }
  }

  const auto steps = static_cast<std::size_t>(std::ceil(horizon / step - 1e-9));
  const double h = horizon / static_cast<double>(steps);
  const std::size_t stride = std::max<std::size_t>(1, options.record_stride);

  std::vector<double> u = mu.dense(n_states);
  std::vector<double> k1(n_states), k2(n_states), k3(n_states), k4(n_states), tmp(n_states);
  auto rk4 = [&](const std::vector<double>& from, double dt, std::vector<double>& to) {
    op.apply(from, k1);
    for (std::size_t i = 0; i < n_states; ++i) tmp[i] = from[i] + 0.5 * dt * k1[i];
    op.apply(tmp, k2);
    for (std::size_t i = 0; i < n_states; ++i) tmp[i] = from[i] + 0.5 * dt * k2[i];
    op.apply(tmp, k3);
    for (std::size_t i = 0; i < n_states; ++i) tmp[i] = from[i] + dt * k3[i];
    op.apply(tmp, k4);
    to.resize(n_states);
    for (std::size_t i = 0; i < n_states; ++i) {
      to[i] = from[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
  };

  std::vector<double> times{0.0};
  std::vector<std::vector<double>> masses{u};
  double max_renorm = 0.0;
  double richardson = 0.0;
  std::vector<double> next, half, two_halves;
  for (std::size_t s = 1; s <= steps; ++s) {
    rk4(u, h, next);
    if (s == steps) {
      rk4(u, 0.5 * h, half);
      rk4(half, 0.5 * h, two_halves);
      double diff = 0.0;
      for (std::size_t i = 0; i < n_states; ++i) diff = std::max(diff, std::abs(next[i] - two_halves[i]));
      richardson = diff * 16.0 / 15.0;
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n_states; ++i) {
      if (next[i] < -options.negative_tolerance) {
        fail(ErrorCode::kStepUnstable, "negative mass " + format_double(next[i]) + " at state " +
                                           std::to_string(i + 1) + ", t=" + format_double(s * h));
      }
      next[i] = std::max(0.0, next[i]);
      total += next[i];
    }
    max_renorm = std::max(max_renorm, std::abs(total - 1.0));
    for (double& v : next) v /= total;
    u.swap(next);
    if (truncating) {
      double edge_mass = 0.0;
      for (std::size_t i = 0; i < n_states; ++i) {
        if (near_boundary[i]) edge_mass += u[i];
      }
      if (edge_mass > options.leak_tolerance) {
        fail(ErrorCode::kTruncationLeak, "mass " + format_double(edge_mass) +
                                             " next to the truncation boundary K=" +
                                             std::to_string(n_states) + " at t=" + format_double(s * h));
      }
    }
    if (s % stride == 0 || s == steps) {
      times.push_back(s == steps ? horizon : static_cast<double>(s) * h);
      masses.push_back(u);
    }
  }
  ConditionedPath path(n_states, std::move(times), std::move(masses));
  path.max_renormalization = max_renorm;
  path.richardson_error = richardson;
  return path;
}

}  // namespace qsd
