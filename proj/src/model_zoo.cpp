#include "qsd/model_zoo.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "qsd/error.hpp"
#include "qsd/format.hpp"

namespace qsd {

double DiscreteChainModel::at(State x, State y) const {
  for (const Entry& e : rows.at(x - 1)) {
    if (e.to == y) return e.p;
  }
  return 0.0;
}

AbsorbedChainModel point_model() {
  return build_finite({{0.0}}, {1.0}, "point");
}

AbsorbedChainModel two_state_model() {
  return build_finite({{0.0, 1.0}, {1.0, 0.0}}, {1.0, 0.0}, "two-state");
}

AbsorbedChainModel build_finite(const std::vector<std::vector<double>>& rates,
                                const std::vector<double>& absorb, std::string name) {
  const std::size_t k = rates.size();
  if (k == 0 || absorb.size() != k) {
    fail(ErrorCode::kInvalidArgument, "rate matrix must be K x K with K absorption rates");
  }
  std::vector<Row> rows(k);
  for (std::size_t x = 0; x < k; ++x) {
    if (rates[x].size() != k) fail(ErrorCode::kInvalidArgument, "rate matrix is not square");
    if (absorb[x] < 0.0) fail(ErrorCode::kNegativeRate, "q(" + std::to_string(x + 1) + ",0) < 0");
    rows[x].absorb = absorb[x];
    for (std::size_t y = 0; y < k; ++y) {
      const double q = rates[x][y];
      if (x == y) {
        if (q != 0.0) {
          fail(ErrorCode::kSelfLoop, "diagonal q(" + std::to_string(x + 1) + "," +
                                         std::to_string(x + 1) + ") is derived, not supplied");
        }
        continue;
      }
      if (q < 0.0) {
        fail(ErrorCode::kNegativeRate,
             "q(" + std::to_string(x + 1) + "," + std::to_string(y + 1) + ") < 0");
      }
      if (q > 0.0) rows[x].jumps.push_back({static_cast<State>(y + 1), q});
    }
  }
  return AbsorbedChainModel::finite(std::move(rows), std::move(name));
}

namespace {

void birth_death_row(const BirthDeathSpec& spec, State x, Row& out) {
  out.jumps.clear();
  const double p = spec.up_rate(x);
  const double q = spec.down_rate(x);
  if (x == 1) {
    out.absorb = q;
  } else {
    out.absorb = 0.0;
    if (q > 0.0) out.jumps.push_back({x - 1, q});
  }
  if (p > 0.0) out.jumps.push_back({x + 1, p});
}

void check_spec(const BirthDeathSpec& s) {
  if (s.up < 0 || s.up_per_x < 0 || s.down < 0 || s.down_per_x < 0) {
    fail(ErrorCode::kNegativeRate, "birth-death rates must be nonnegative");
  }
}

}  // namespace

AbsorbedChainModel build_birth_death(const BirthDeathSpec& spec, std::optional<std::size_t> k,
                                     std::string name) {
  check_spec(spec);
  if (k) {
    if (*k == 0) fail(ErrorCode::kInvalidArgument, "K must be at least 1");
    std::vector<Row> rows(*k);
    for (std::size_t x = 1; x <= *k; ++x) {
      birth_death_row(spec, static_cast<State>(x), rows[x - 1]);
      std::erase_if(rows[x - 1].jumps, [&](const Jump& j) { return j.to > *k; });
    }
    return AbsorbedChainModel::finite(std::move(rows), std::move(name));
  }
  Bounds b;
  const bool linear = spec.up_per_x > 0.0 || spec.down_per_x > 0.0;
  b.c0 = spec.down_rate(1);
  b.qbar = linear ? kInfinity : spec.up + spec.down;
  b.column = linear ? kInfinity : std::max(spec.up + spec.down, spec.down_rate(1));
  return AbsorbedChainModel::lazy(
      [spec](State x, Row& out) { birth_death_row(spec, x, out); }, std::move(name), b);
}

AbsorbedChainModel build_galton_watson(const GaltonWatsonSpec& spec) {
  if (!(spec.split > 0.0) || !(spec.death > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "split and death rates must be positive");
  }
  if (spec.split >= spec.death) {
    fail(ErrorCode::kSupercriticalSpec, "Galton-Watson chain needs split < death");
  }
  BirthDeathSpec bd{0.0, spec.split, 0.0, spec.death};
  Bounds b{spec.death, kInfinity, kInfinity};
  auto m = build_birth_death(bd, std::nullopt,
                             "gw:" + format_double(spec.split) + "," + format_double(spec.death));
  return m.with_bounds(b);
}

DiscreteChainModel uniformize(const AbsorbedChainModel& model, double rate) {
  const auto k = model.num_states();
  if (!k) fail(ErrorCode::kUnsupported, "uniformization needs a finite model");
  const double max_rate = model.max_total_rate(*k);
  if (rate < max_rate || !(rate > 0.0)) {
    fail(ErrorCode::kRateTooSmall, "uniformization rate " + format_double(rate) +
                                       " below max total rate " + format_double(max_rate));
  }
  DiscreteChainModel d;
  d.rows.resize(*k);
  d.kill.resize(*k);
  for (std::size_t x = 1; x <= *k; ++x) {
    const Row* r = model.finite_row(static_cast<State>(x));
    auto& row = d.rows[x - 1];
    const double hold = 1.0 - r->total() / rate;
    double hold_acc = hold;
    for (const Jump& j : r->jumps) {
      if (j.to == x) continue;
      row.push_back({j.to, j.rate / rate});
    }
    row.push_back({static_cast<State>(x), std::max(0.0, hold_acc)});
    std::sort(row.begin(), row.end(), [](const auto& a, const auto& b) { return a.to < b.to; });
    std::erase_if(row, [](const auto& e) { return e.p == 0.0; });
    d.kill[x - 1] = r->absorb / rate;
  }
  return d;
}

DiscreteChainModel uniformize(const AbsorbedChainModel& model) {
  const auto k = model.num_states();
  if (!k) fail(ErrorCode::kUnsupported, "uniformization needs a finite model");
  return uniformize(model, kUniformizationSlack * model.max_total_rate(*k));
}

bool is_irreducible(const DiscreteChainModel& d) {
  const std::size_t n = d.size();
  if (n == 0) return false;
  std::vector<std::vector<State>> fwd(n + 1), bwd(n + 1);
  for (std::size_t x = 1; x <= n; ++x) {
    for (const auto& e : d.rows[x - 1]) {
      if (e.p > 0.0) {
        fwd[x].push_back(e.to);
        bwd[e.to].push_back(static_cast<State>(x));
      }
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

std::size_t period(const DiscreteChainModel& d) {
  const std::size_t n = d.size();
  std::vector<long long> level(n + 1, -1);
  std::vector<State> queue{1};
  level[1] = 0;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const State s = queue[head];
    for (const auto& e : d.rows[s - 1]) {
      if (e.p > 0.0 && level[e.to] < 0) {
        level[e.to] = level[s] + 1;
        queue.push_back(e.to);
      }
    }
  }
  long long g = 0;
  for (std::size_t x = 1; x <= n; ++x) {
    if (level[x] < 0) continue;
    for (const auto& e : d.rows[x - 1]) {
      if (e.p > 0.0 && level[e.to] >= 0) g = std::gcd(g, std::llabs(level[x] + 1 - level[e.to]));
    }
  }
  return g == 0 ? 0 : static_cast<std::size_t>(g);
}

namespace {

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

}  // namespace

AbsorbedChainModel model_from_spec(const std::string& spec) {
  if (spec == "point") return point_model();
  if (spec == "two-state") return two_state_model();
  if (spec.rfind("file:", 0) == 0) return load_model_file(spec.substr(5));
  if (spec.rfind("bd:", 0) == 0) {
    const auto parts = split_commas(spec.substr(3));
    if (parts.size() != 2 && parts.size() != 3) {
      fail(ErrorCode::kConfigInvalid, "expected bd:p,q[,K] in '" + spec + "'");
    }
    const double p = parse_double(parts[0], spec);
    const double q = parse_double(parts[1], spec);
    std::optional<std::size_t> k;
    if (parts.size() == 3) {
      const long long kk = parse_int(parts[2], spec);
      if (kk < 1) fail(ErrorCode::kConfigInvalid, "K must be positive in '" + spec + "'");
      k = static_cast<std::size_t>(kk);
    }
    return build_birth_death(BirthDeathSpec::constant(p, q), k, spec);
  }
  if (spec.rfind("gw:", 0) == 0) {
    const auto parts = split_commas(spec.substr(3));
    if (parts.size() != 2) fail(ErrorCode::kConfigInvalid, "expected gw:b,d in '" + spec + "'");
    return build_galton_watson({parse_double(parts[0], spec), parse_double(parts[1], spec)});
  }
  fail(ErrorCode::kConfigInvalid, "unknown model '" + spec + "'");
}

}  // namespace qsd
