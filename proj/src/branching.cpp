#include "qsd/branching.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "qsd/error.hpp"
#include "qsd/format.hpp"
#include "qsd/oracle.hpp"
#include "qsd/parallel.hpp"

namespace qsd {

double ShiftedMeanMatrix::at(State x, State y) const {
  for (const Entry& e : rows[x - 1]) {
    if (e.to == y) return e.mean;
  }
  return 0.0;
}

ShiftedMeanMatrix build_shifted(const AbsorbedChainModel& model, std::optional<double> alpha) {
  const auto k = model.num_states();
  if (!k) fail(ErrorCode::kUnsupported, "branching needs a finite type set");
  double max_rate = 0.0;
  double c0 = 0.0;
  for (State x = 1; x <= *k; ++x) {
    max_rate = std::max(max_rate, model.total_rate(x));
    c0 = std::max(c0, model.absorb_rate(x));
  }
  ShiftedMeanMatrix sm;
  if (alpha) {
    if (*alpha < 0.0) fail(ErrorCode::kNegativeMean, "alpha must be nonnegative");
    sm.alpha = *alpha;
  } else {
    sm.alpha = max_rate > c0 ? max_rate : max_rate + 1.0;
  }
  sm.rows.resize(*k);
  for (State x = 1; x <= *k; ++x) {
    const Row r = model.row(x);
    const double diag = -r.total() + sm.alpha + 1.0;
    if (diag < 0.0) {
      fail(ErrorCode::kNegativeMean, "mean offspring of type " + std::to_string(x) + " at itself is " +
                                         format_double(diag) + " < 0");
    }
    auto& row = sm.rows[x - 1];
    for (const Jump& j : r.jumps) {
      if (j.rate > 0.0) row.push_back({j.to, j.rate});
    }
    if (diag > 0.0) row.push_back({x, diag});
    std::sort(row.begin(), row.end(), [](const auto& a, const auto& b) { return a.to < b.to; });
  }
  if (sm.alpha > c0) {
    sm.supercritical = true;
  } else {
    const double lambda = solve_qsd_power(model, *k).lambda;
    sm.lambda_alpha = lambda + sm.alpha;
    sm.supercritical = *sm.lambda_alpha > 0.0;
  }
  return sm;
}

BranchingPopulation::BranchingPopulation(std::size_t k, State founder, std::uint64_t cap)
    : counts_(k, 0), tree_(k + 1, 0.0), cap_(cap) {
  if (founder == kAbsorbing || founder > k) fail(ErrorCode::kInvalidArgument, "founder type outside {1..K}");
  if (cap < 2) fail(ErrorCode::kInvalidArgument, "cap must be at least 2");
  add(founder, 1);
}

void BranchingPopulation::add(State x, std::int64_t delta) {
  counts_[x - 1] = static_cast<std::uint64_t>(static_cast<std::int64_t>(counts_[x - 1]) + delta);
  total_ = static_cast<std::uint64_t>(static_cast<std::int64_t>(total_) + delta);
  for (std::size_t j = x; j < tree_.size(); j += j & (~j + 1)) tree_[j] += static_cast<double>(delta);
}

State BranchingPopulation::pick(double target) const {
  std::size_t pos = 0;
  std::size_t step = 1;
  while (step * 2 < tree_.size()) step *= 2;
  for (; step > 0; step /= 2) {
    const std::size_t nxt = pos + step;
    if (nxt < tree_.size() && tree_[nxt] <= target) {
      pos = nxt;
      target -= tree_[nxt];
    }
  }
  std::size_t i = std::min(pos, counts_.size() - 1);
  while (counts_[i] == 0 && i > 0) --i;
  return static_cast<State>(i + 1);
}

std::vector<double> BranchingPopulation::proportions() const {
  std::vector<double> p(counts_.size(), 0.0);
  if (total_ == 0) return p;
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    p[i] = static_cast<double>(counts_[i]) / static_cast<double>(total_);
  }
  return p;
}

bool BranchingPopulation::step(const ShiftedMeanMatrix& sm, RngStream& rng) {
  if (total_ == 0) return false;
  time_ += rng.exponential(static_cast<double>(total_));
  const State x = pick(static_cast<double>(rng.below(total_)));
  add(x, -1);
  for (const auto& e : sm.rows[x - 1]) {
    std::poisson_distribution<std::int64_t> offspring(e.mean);
    const std::int64_t n = offspring(rng);
    if (n > 0) add(e.to, n);
  }
  if (total_ > cap_) {
    downsample(cap_ / 2, rng);
    ++cap_events_;
  }
  return total_ > 0;
}

void BranchingPopulation::downsample(std::uint64_t target, RngStream& rng) {
  std::uint64_t remaining_draws = target;
  double remaining_mass = static_cast<double>(total_);
  std::vector<std::uint64_t> next(counts_.size(), 0);
  for (std::size_t i = 0; i < counts_.size() && remaining_draws > 0; ++i) {
    if (counts_[i] == 0) continue;
    const double p = std::min(1.0, static_cast<double>(counts_[i]) / remaining_mass);
    std::binomial_distribution<std::uint64_t> bin(remaining_draws, p);
    next[i] = bin(rng);
    remaining_draws -= next[i];
    remaining_mass -= static_cast<double>(counts_[i]);
  }
  std::fill(tree_.begin(), tree_.end(), 0.0);
  counts_.assign(counts_.size(), 0);
  total_ = 0;
  for (std::size_t i = 0; i < next.size(); ++i) {
    if (next[i] > 0) add(static_cast<State>(i + 1), static_cast<std::int64_t>(next[i]));
  }
}

namespace {

struct ReplicaResult {
  bool survived = false;
  std::size_t attempts = 0;
  std::vector<double> proportions;
  std::optional<double> slope;
  std::uint64_t cap_events = 0;
};

std::optional<double> fit_slope(const std::vector<double>& t, const std::vector<double>& y) {
  if (t.size() < 3) return std::nullopt;
  const double n = static_cast<double>(t.size());
  double st = 0, sy = 0, stt = 0, sty = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    st += t[i];
    sy += y[i];
    stt += t[i] * t[i];
    sty += t[i] * y[i];
  }
  const double den = n * stt - st * st;
  if (!(den > 0.0)) return std::nullopt;
  return (n * sty - st * sy) / den;
}

}  // namespace

KsEstimate ks_estimate(const AbsorbedChainModel& model, const KsOptions& opt, std::uint64_t seed) {
  const ShiftedMeanMatrix sm = build_shifted(model, opt.alpha);
  if (!sm.supercritical) {
    fail(ErrorCode::kInvalidArgument,
         "shifted branching process is not supercritical for alpha=" + format_double(sm.alpha));
  }
  if (!(opt.horizon > 0.0) || !(opt.sample_dt > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "horizon and sample_dt must be positive");
  }
  const std::size_t k = sm.size();
  const auto results = run_replicas(opt.replicas, [&](std::size_t r) {
    ReplicaResult res;
    for (std::size_t a = 0; a <= opt.restarts; ++a) {
      ++res.attempts;
      RngStream rng(seed, {r, static_cast<std::uint64_t>(Purpose::kBranching), a});
      BranchingPopulation pop(k, opt.founder, opt.cap);
      std::vector<double> ts, ys;
      double next_sample = 0.0;
      bool window_open = true;
      bool alive = true;
      while (alive) {
        // memoryless: the event that would overshoot the horizon is dropped
        RngStream probe = rng;
        const double dt = probe.exponential(static_cast<double>(pop.total()));
        if (pop.time() + dt > opt.horizon) break;
        while (next_sample <= pop.time() + dt && next_sample <= opt.horizon) {
          if (window_open && pop.total() >= opt.fit_from) {
            ts.push_back(next_sample);
            ys.push_back(std::log(static_cast<double>(pop.total())));
          }
          next_sample += opt.sample_dt;
        }
        alive = pop.step(sm, rng);
        if (pop.cap_events() > 0) window_open = false;
      }
      if (!alive) continue;
      res.survived = true;
      res.proportions = pop.proportions();
      res.slope = fit_slope(ts, ys);
      res.cap_events = pop.cap_events();
      break;
    }
    return res;
  });

  KsEstimate out;
  out.alpha = sm.alpha;
  std::vector<double> acc(k, 0.0);
  double slope_sum = 0.0;
  std::size_t slopes = 0;
  for (const auto& res : results) {
    out.attempts += res.attempts;
    out.cap_events += res.cap_events;
    if (!res.survived) continue;
    ++out.survivors;
    for (std::size_t i = 0; i < k; ++i) acc[i] += res.proportions[i];
    if (res.slope) {
      slope_sum += *res.slope;
      ++slopes;
    }
  }
  if (out.survivors == 0) {
    fail(ErrorCode::kAllExtinct, "all " + std::to_string(out.attempts) + " branching attempts died out");
  }
  out.survival_fraction = static_cast<double>(out.survivors) / static_cast<double>(out.attempts);
  out.nu_hat = Distribution::from_dense(acc);
  if (slopes > 0) {
    out.growth_rate_fit = slope_sum / static_cast<double>(slopes);
    out.theta_hat = sm.alpha - *out.growth_rate_fit;
  }
  return out;
}

}  // namespace qsd
