#include "qsd/graphical.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "qsd/error.hpp"
#include "qsd/format.hpp"

namespace qsd {

MarkStream::MarkStream(double qbar, double c0, RngStream internal, RngStream voter)
    : qbar_(qbar), c0_(c0), internal_rng_(std::move(internal)), voter_rng_(std::move(voter)) {
  internal_.voter = false;
  voter_.voter = true;
  draw_internal(0.0);
  draw_voter(0.0);
}

void MarkStream::draw_internal(double from) {
  internal_.time = qbar_ > 0.0 ? from + internal_rng_.exponential(qbar_) : kInfinity;
  internal_.u = internal_rng_.uniform();
}

void MarkStream::draw_voter(double from) {
  voter_.time = c0_ > 0.0 ? from + voter_rng_.exponential(c0_) : kInfinity;
  voter_.b = voter_rng_.uniform();
  voter_.v = voter_rng_.uniform();
}

Mark MarkStream::pop() {
  if (internal_.time <= voter_.time) {
    Mark m = internal_;
    draw_internal(m.time);
    return m;
  }
  Mark m = voter_;
  draw_voter(m.time);
  return m;
}

namespace {

std::pair<double, double> graphical_rates(const AbsorbedChainModel& model) {
  const Bounds& b = model.bounds();
  if (!b.qbar || !std::isfinite(*b.qbar) || !b.c0 || !std::isfinite(*b.c0)) {
    fail(ErrorCode::kUnsupported,
         "graphical construction needs finite qbar and C0 (model " + model.name() + ")");
  }
  return {*b.qbar, *b.c0};
}

}  // namespace

GraphicalFv::GraphicalFv(const AbsorbedChainModel& model, std::vector<State> positions,
                         std::uint64_t seed, std::uint64_t replica)
    : model_(model), rows_(model_), positions_(std::move(positions)) {
  std::tie(qbar_, c0_) = graphical_rates(model_);
  if (positions_.size() < 2) fail(ErrorCode::kInvalidArgument, "need at least 2 particles");
  State top = 1;
  for (State x : positions_) {
    if (x == kAbsorbing) fail(ErrorCode::kInvalidArgument, "particle at the cemetery");
    top = std::max(top, x);
  }
  counts_ = FenwickTree(std::max<std::size_t>(16, 2 * static_cast<std::size_t>(top)));
  for (State x : positions_) place(x, +1);
  marks_.reserve(positions_.size());
  for (std::size_t i = 0; i < positions_.size(); ++i) {
    marks_.emplace_back(qbar_, c0_,
                        RngStream(seed, {replica, static_cast<std::uint64_t>(Purpose::kInternalMarks), i}),
                        RngStream(seed, {replica, static_cast<std::uint64_t>(Purpose::kVoterMarks), i}));
  }
  tagged_.times.push_back(0.0);
  tagged_.states.push_back(positions_[0]);
}

void GraphicalFv::attach_limit(const ConditionedPath& path, State y0) {
  path_ = &path;
  y_ = y0;
  limit_ = Trajectory{};
  limit_.times.push_back(time_);
  limit_.states.push_back(y0);
  if (y0 != positions_[0]) divergence_time_ = time_;
}

std::size_t GraphicalFv::count(State x) const {
  if (x == kAbsorbing || x > counts_.size()) return 0;
  return static_cast<std::size_t>(std::lround(counts_.weight(x - 1)));
}

void GraphicalFv::place(State x, int delta) {
  if (x > counts_.size()) counts_.resize(2 * static_cast<std::size_t>(x));
  counts_.set(x - 1, counts_.weight(x - 1) + delta);
}

Distribution GraphicalFv::empirical() const {
  std::vector<Distribution::Entry> w;
  w.reserve(positions_.size());
  for (State x : positions_) w.push_back({x, 1.0});
  return Distribution::from_weights(std::move(w));
}

double GraphicalFv::l1_to(const std::vector<double>& law) const {
  const double n = static_cast<double>(positions_.size());
  const std::size_t top = std::max(law.size(), counts_.size());
  double s = 0.0;
  for (std::size_t i = 0; i < top; ++i) {
    const double m = i < counts_.size() ? counts_.weight(i) / n : 0.0;
    const double l = i < law.size() ? law[i] : 0.0;
    s += std::abs(m - l);
  }
  return s;
}

const std::vector<GraphicalFv::Segment>& GraphicalFv::internal_partition(State x) {
  auto [it, inserted] = partitions_.try_emplace(x);
  if (!inserted) return it->second;
  const Row& r = rows_.get(x);
  std::vector<Jump> jumps = r.jumps;
  std::sort(jumps.begin(), jumps.end(), [](const Jump& a, const Jump& b) { return a.to < b.to; });
  const double stay = qbar_ - r.jump_total();
  if (stay < -1e-9 * std::max(1.0, qbar_)) {
    fail(ErrorCode::kInvalidArgument, "qbar exceeded at state " + std::to_string(x));
  }
  double acc = 0.0;
  bool placed_self = false;
  for (const Jump& j : jumps) {
    if (!placed_self && j.to > x) {
      acc += std::max(0.0, stay);
      it->second.push_back({x, acc});
      placed_self = true;
    }
    acc += j.rate;
    it->second.push_back({j.to, acc});
  }
  if (!placed_self) {
    acc += std::max(0.0, stay);
    it->second.push_back({x, acc});
  }
  return it->second;
}

State GraphicalFv::internal_target(State x, double u) {
  const auto& part = internal_partition(x);
  const double target = u * qbar_;
  for (const Segment& s : part) {
    if (target < s.upper) return s.state;
  }
  return x;
}

State GraphicalFv::voter_target(std::size_t i, double v) {
  const State self = positions_[i];
  place(self, -1);
  const double others = static_cast<double>(positions_.size() - 1);
  const State y = static_cast<State>(counts_.find(v * others) + 1);
  place(self, +1);
  return y;
}

void GraphicalFv::apply(std::size_t i, const Mark& m) {
  const State x = positions_[i];
  State to = x;
  State y_to = y_;
  const bool coupled = path_ != nullptr && i == 0;
  if (!m.voter) {
    to = internal_target(x, m.u);
    if (coupled) y_to = internal_target(y_, m.u);
  } else {
    if (m.b * c0_ <= rows_.get(x).absorb) to = voter_target(i, m.v);
    if (coupled && m.b * c0_ <= rows_.get(y_).absorb) y_to = sample_path_law(*path_, m.time, m.v);
  }
  if (to != x) {
    place(x, -1);
    place(to, +1);
    positions_[i] = to;
    if (i == 0) {
      tagged_.times.push_back(m.time);
      tagged_.states.push_back(to);
      ++tagged_.events;
    }
  }
  if (coupled && y_to != y_) {
    y_ = y_to;
    limit_.times.push_back(m.time);
    limit_.states.push_back(y_);
    ++limit_.events;
  }
  if (coupled && divergence_time_ == kInfinity && positions_[0] != y_) divergence_time_ = m.time;
}

void GraphicalFv::advance_to(double t, std::uint64_t event_cap) {
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  for (std::size_t i = 0; i < marks_.size(); ++i) queue.emplace(marks_[i].peek().time, i);
  std::uint64_t done = 0;
  while (!queue.empty() && queue.top().first <= t) {
    const std::size_t i = queue.top().second;
    queue.pop();
    if (++done > event_cap) {
      fail(ErrorCode::kEventCapExceeded, "graphical run passed " + std::to_string(event_cap) + " rings");
    }
    const Mark m = marks_[i].pop();
    apply(i, m);
    ++events_;
    queue.emplace(marks_[i].peek().time, i);
  }
  time_ = t;
}

CoupledRun coupled_tagged_run(const AbsorbedChainModel& model, const Distribution& mu,
                              const ConditionedPath& path, std::size_t n, double horizon,
                              double grid_dt, std::uint64_t seed, std::uint64_t replica,
                              std::uint64_t event_cap) {
  graphical_rates(model);
  if (horizon > path.horizon() * (1.0 + 1e-12)) {
    fail(ErrorCode::kPathTooShort, "horizon " + format_double(horizon) + " beyond path horizon " +
                                       format_double(path.horizon()));
  }
  if (!(grid_dt > 0.0)) fail(ErrorCode::kInvalidArgument, "grid_dt must be positive");
  if (n < 2) fail(ErrorCode::kInvalidArgument, "need at least 2 particles");

  RngStream init(seed, {replica, static_cast<std::uint64_t>(Purpose::kInit)});
  RngStream coupling(seed, {replica, static_cast<std::uint64_t>(Purpose::kCoupling)});
  const double u0 = coupling.uniform();
  std::vector<State> positions(n);
  positions[0] = mu.inverse_cdf(u0);
  for (std::size_t i = 1; i < n; ++i) positions[i] = mu.sample(init);

  GraphicalFv fv(model, std::move(positions), seed, replica);
  fv.attach_limit(path, sample_path_law(path, 0.0, u0));

  CoupledRun out;
  std::vector<double> law;
  const auto steps = static_cast<std::size_t>(std::floor(horizon / grid_dt + 1e-9));
  for (std::size_t k = 0; k <= steps; ++k) {
    const double s = std::min(horizon, static_cast<double>(k) * grid_dt);
    fv.advance_to(s, event_cap);
    path.dense_at(s, law);
    out.grid.push_back(s);
    out.deviation.push_back(fv.l1_to(law));
  }
  if (fv.time() < horizon) fv.advance_to(horizon, event_cap);
  out.tagged = fv.tagged();
  out.limit = fv.limit();
  out.psi = fv.diverged();
  out.divergence_time = fv.divergence_time();
  out.final_empirical = fv.empirical();
  return out;
}

}  // namespace qsd
