#include "qsd/fleming_viot.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "qsd/error.hpp"
#include "qsd/format.hpp"
#include "qsd/parallel.hpp"

namespace qsd {

ParticleConfig::ParticleConfig(std::vector<State> positions) : positions_(std::move(positions)) {
  if (positions_.size() < 2) fail(ErrorCode::kInvalidArgument, "Fleming-Viot needs N >= 2");
  for (State x : positions_) {
    if (x == kAbsorbing) fail(ErrorCode::kInvalidArgument, "particle placed at state 0");
  }
}

ParticleConfig ParticleConfig::sample_iid(const Distribution& law, std::size_t n, RngStream& rng) {
  std::vector<State> pos(n);
  for (State& x : pos) x = law.sample(rng);
  return ParticleConfig(std::move(pos));
}

ParticleConfig ParticleConfig::from_quota(const Distribution& law, std::size_t n) {
  std::vector<std::pair<double, State>> remainders;
  std::vector<State> pos;
  pos.reserve(n);
  for (const auto& e : law) {
    const double want = e.mass * static_cast<double>(n);
    const auto whole = static_cast<std::size_t>(std::floor(want));
    pos.insert(pos.end(), whole, e.state);
    remainders.push_back({want - static_cast<double>(whole), e.state});
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; pos.size() < n; ++i) pos.push_back(remainders[i % remainders.size()].second);
  std::sort(pos.begin(), pos.end());
  return ParticleConfig(std::move(pos));
}

Distribution ParticleConfig::empirical() const {
  std::vector<Distribution::Entry> w;
  w.reserve(positions_.size());
  for (State x : positions_) w.push_back({x, 1.0});
  return Distribution::from_weights(std::move(w));
}

FvSystem::FvSystem(const AbsorbedChainModel& model, const ParticleConfig& init)
    : rows_(model),
      positions_(init.positions().begin(), init.positions().end()),
      slot_index_(positions_.size()),
      member_index_(positions_.size()) {
  for (std::uint32_t i = 0; i < positions_.size(); ++i) {
    const std::size_t s = slot_of(positions_[i]);
    slot_index_[i] = static_cast<std::uint32_t>(s);
    member_index_[i] = static_cast<std::uint32_t>(slots_[s].members.size());
    slots_[s].members.push_back(i);
  }
  for (std::size_t s = 0; s < slots_.size(); ++s) {
    tree_.set(s, static_cast<double>(slots_[s].members.size()) * slots_[s].rate);
  }
  tree_.rebuild();
}

std::size_t FvSystem::slot_of(State x) {
  auto [it, inserted] = slot_by_state_.try_emplace(x, static_cast<std::uint32_t>(slots_.size()));
  if (inserted) {
    Slot s;
    s.state = x;
    s.row = &rows_.get(x);
    s.rate = s.row->total();
    s.last = accumulating_ ? std::max(time_, occupation_start_) : 0.0;
    slots_.push_back(std::move(s));
    if (tree_.size() < slots_.size()) tree_.resize(std::max<std::size_t>(16, 2 * slots_.size()));
  }
  return it->second;
}

void FvSystem::settle(Slot& s, double t) {
  if (!accumulating_ || t <= s.last) return;
  s.acc += static_cast<double>(s.members.size()) * (t - s.last);
  s.last = t;
}

void FvSystem::move(std::uint32_t particle, State to) {
  const State from = positions_[particle];
  if (from == to) return;
  const std::size_t src = slot_index_[particle];
  const std::size_t dst = slot_of(to);
  Slot& a = slots_[src];
  Slot& b = slots_[dst];
  settle(a, time_);
  settle(b, time_);

  const std::uint32_t idx = member_index_[particle];
  const std::uint32_t last = a.members.back();
  a.members[idx] = last;
  member_index_[last] = idx;
  a.members.pop_back();

  member_index_[particle] = static_cast<std::uint32_t>(b.members.size());
  b.members.push_back(particle);
  slot_index_[particle] = static_cast<std::uint32_t>(dst);
  positions_[particle] = to;

  tree_.set(src, static_cast<double>(a.members.size()) * a.rate);
  tree_.set(dst, static_cast<double>(b.members.size()) * b.rate);
}

FvEvent FvSystem::step(RngStream& rng) {
  const double total = tree_.total();
  if (!(total > 0.0)) fail(ErrorCode::kDeadConfig, "all particles sit at zero-rate states");
  FvEvent ev;
  ev.dt = rng.exponential(total);
  time_ += ev.dt;

  const std::size_t s = tree_.find(rng.uniform() * total);
  const Slot& slot = slots_[s];
  const auto particle = slot.members[rng.below(slot.members.size())];
  ev.particle = particle;
  ev.from = slot.state;
  State to = pick_move(*slot.row, rng.uniform() * slot.rate);
  if (to == kAbsorbing) {
    ev.revival = true;
    ++revivals_;
    const std::uint64_t n = positions_.size();
    std::uint64_t j = rng.below(n);
    while (j == particle) j = rng.below(n);
    to = positions_[j];
  }
  ev.to = to;
  move(particle, to);
  ++events_;
  if ((events_ & 0xFFFF) == 0) tree_.rebuild();
  return ev;
}

std::size_t FvSystem::count(State x) const {
  auto it = slot_by_state_.find(x);
  return it == slot_by_state_.end() ? 0 : slots_[it->second].members.size();
}

Distribution FvSystem::empirical() const {
  std::vector<Distribution::Entry> w;
  for (const Slot& s : slots_) {
    if (!s.members.empty()) w.push_back({s.state, static_cast<double>(s.members.size())});
  }
  return Distribution::from_weights(std::move(w));
}

void FvSystem::empirical_dense(std::size_t k, std::vector<double>& out) const {
  out.assign(k, 0.0);
  const double n = static_cast<double>(positions_.size());
  for (const Slot& s : slots_) {
    if (s.state <= k) out[s.state - 1] = static_cast<double>(s.members.size()) / n;
  }
}

double FvSystem::recomputed_rate() const {
  double total = 0.0;
  for (State x : positions_) total += slots_[slot_by_state_.at(x)].rate;
  return total;
}

void FvSystem::check_invariants() const {
  std::size_t total = 0;
  for (std::size_t s = 0; s < slots_.size(); ++s) {
    const Slot& slot = slots_[s];
    total += slot.members.size();
    for (std::size_t m = 0; m < slot.members.size(); ++m) {
      const auto p = slot.members[m];
      if (positions_[p] != slot.state || slot_index_[p] != s || member_index_[p] != m) {
        fail(ErrorCode::kInvalidArgument, "particle index out of sync");
      }
    }
  }
  if (total != positions_.size()) fail(ErrorCode::kInvalidArgument, "occupancy does not sum to N");
  for (State x : positions_) {
    if (x == kAbsorbing) fail(ErrorCode::kInvalidArgument, "particle at 0");
  }
  const double fresh = recomputed_rate();
  if (std::abs(fresh - tree_.total()) > 1e-9 * std::max(1.0, fresh)) {
    fail(ErrorCode::kInvalidArgument, "rate index drifted: " + format_double(tree_.total()) +
                                          " vs " + format_double(fresh));
  }
}

void FvSystem::start_occupation(double t0) {
  accumulating_ = true;
  occupation_start_ = t0;
  for (Slot& s : slots_) {
    s.acc = 0.0;
    s.last = std::max(t0, time_);
  }
}

Distribution FvSystem::occupation(double t) const {
  if (!accumulating_) fail(ErrorCode::kInvalidArgument, "occupation tracking not started");
  std::vector<Distribution::Entry> w;
  for (const Slot& s : slots_) {
    double acc = s.acc;
    if (t > s.last) acc += static_cast<double>(s.members.size()) * (t - s.last);
    if (acc > 0.0) w.push_back({s.state, acc});
  }
  return Distribution::from_weights(std::move(w));
}

namespace {

/// Advances until the next event would pass `until`; the overshooting draw
/// is discarded, which leaves the law unchanged by memorylessness.
void advance_to(FvSystem& fv, RngStream& rng, double until, std::uint64_t cap) {
  for (;;) {
    if (fv.events() >= cap) {
      fail(ErrorCode::kEventCapExceeded, "Fleming-Viot run passed " + std::to_string(cap) + " events");
    }
    RngStream probe = rng;
    const double total = fv.aggregate_rate();
    if (!(total > 0.0)) fail(ErrorCode::kDeadConfig, "all particles sit at zero-rate states");
    if (fv.time() + probe.exponential(total) > until) {
      rng = probe;
      return;
    }
    fv.step(rng);
  }
}

}  // namespace

FvTrace fv_run(const AbsorbedChainModel& model, const ParticleConfig& init, double horizon,
               double grid_dt, RngStream& rng, std::uint64_t event_cap) {
  if (!(horizon > 0.0)) fail(ErrorCode::kInvalidArgument, "horizon must be positive");
  if (!(grid_dt > 0.0)) fail(ErrorCode::kInvalidArgument, "grid step must be positive");
  FvSystem fv(model, init);
  FvTrace trace;
  trace.times.push_back(0.0);
  trace.measures.push_back(fv.empirical());
  const auto cells = static_cast<std::size_t>(std::floor(horizon / grid_dt + 1e-9));
  for (std::size_t k = 1; k <= cells + 1; ++k) {
    double t = static_cast<double>(k) * grid_dt;
    if (k == cells + 1 || t > horizon) t = horizon;
    if (t <= trace.times.back()) continue;
    advance_to(fv, rng, t, event_cap);
    trace.times.push_back(t);
    trace.measures.push_back(fv.empirical());
  }
  trace.events = fv.events();
  trace.revivals = fv.revivals();
  return trace;
}

ParticleConfig fv_final(const AbsorbedChainModel& model, const ParticleConfig& init,
                        double horizon, RngStream& rng, std::uint64_t event_cap) {
  FvSystem fv(model, init);
  advance_to(fv, rng, horizon, event_cap);
  return fv.config();
}

Distribution fv_stationary(const AbsorbedChainModel& model, std::size_t n, double burn_in,
                           double horizon, RngStream& rng, const StationaryOptions& options) {
  if (!(horizon > burn_in) || burn_in < 0.0) {
    fail(ErrorCode::kInvalidArgument, "need 0 <= burn-in < horizon");
  }
  RngStream init_rng = rng.child(Purpose::kInit);
  RngStream dyn = rng.child(Purpose::kDynamics);
  FvSystem fv(model, ParticleConfig::sample_iid(options.init, n, init_rng));
  fv.start_occupation(burn_in);
  advance_to(fv, dyn, horizon, options.event_cap);
  return fv.occupation(horizon);
}

CorrelationEstimate correlation_probe(const AbsorbedChainModel& model, const ParticleConfig& init,
                                      double t, State x, State y, std::size_t replicas,
                                      std::uint64_t seed) {
  if (replicas < 2) fail(ErrorCode::kInvalidArgument, "need at least two replicas");
  const auto samples = run_replicas(replicas, [&](std::size_t r) {
    RngStream rng(seed, {r, static_cast<std::uint64_t>(Purpose::kDynamics)});
    const ParticleConfig end = fv_final(model, init, t, rng);
    double mx = 0.0, my = 0.0;
    for (State s : end.positions()) {
      mx += s == x;
      my += s == y;
    }
    const double n = static_cast<double>(end.size());
    return std::pair<double, double>{mx / n, my / n};
  });
  const double r = static_cast<double>(replicas);
  CorrelationEstimate est;
  for (const auto& [a, b] : samples) {
    est.mean_x += a;
    est.mean_y += b;
  }
  est.mean_x /= r;
  est.mean_y /= r;
  double cov = 0.0;
  std::vector<double> products;
  products.reserve(replicas);
  for (const auto& [a, b] : samples) {
    products.push_back((a - est.mean_x) * (b - est.mean_y));
    cov += products.back();
  }
  cov /= (r - 1.0);
  double ss = 0.0;
  const double pm = cov * (r - 1.0) / r;
  for (double p : products) ss += (p - pm) * (p - pm);
  est.covariance = std::abs(cov);
  est.standard_error = std::sqrt(ss / (r - 1.0) / r);
  const double c0 = model.bounds().c0.value_or(kInfinity);
  est.bound = 2.0 * std::exp(2.0 * c0 * t) / static_cast<double>(init.size());
  return est;
}

}  // namespace qsd
