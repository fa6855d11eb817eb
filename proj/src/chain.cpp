#include "qsd/chain.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "qsd/error.hpp"
#include "qsd/format.hpp"

namespace qsd {

double Row::jump_total() const {
  double t = 0.0;
  for (const Jump& j : jumps) t += j.rate;
  return t;
}

AbsorbedChainModel AbsorbedChainModel::finite(std::vector<Row> rows, std::string name) {
  AbsorbedChainModel m;
  m.rows_ = std::make_shared<const std::vector<Row>>(std::move(rows));
  m.name_ = std::move(name);
  m.bounds_ = compute_bounds(m);
  return m;
}

AbsorbedChainModel AbsorbedChainModel::lazy(RowFn fn, std::string name, Bounds bounds) {
  AbsorbedChainModel m;
  m.fn_ = std::make_shared<const RowFn>(std::move(fn));
  m.name_ = std::move(name);
  m.bounds_ = bounds;
  return m;
}

void AbsorbedChainModel::row(State x, Row& out) const {
  out.jumps.clear();
  out.absorb = 0.0;
  if (x == kAbsorbing) return;
  if (rows_) {
    if (x <= rows_->size()) out = (*rows_)[x - 1];
    return;
  }
  (*fn_)(x, out);
}

Row AbsorbedChainModel::row(State x) const {
  Row r;
  row(x, r);
  return r;
}

double AbsorbedChainModel::absorb_rate(State x) const {
  if (const Row* r = finite_row(x)) return r->absorb;
  return row(x).absorb;
}

double AbsorbedChainModel::total_rate(State x) const {
  if (const Row* r = finite_row(x)) return r->total();
  return row(x).total();
}

std::optional<std::size_t> AbsorbedChainModel::num_states() const {
  if (rows_) return rows_->size();
  return std::nullopt;
}

AbsorbedChainModel AbsorbedChainModel::truncated(std::size_t k) const {
  if (k == 0) fail(ErrorCode::kInvalidArgument, "truncation must keep at least one state");
  std::vector<Row> rows(k);
  for (std::size_t i = 0; i < k; ++i) {
    row(static_cast<State>(i + 1), rows[i]);
    std::erase_if(rows[i].jumps, [k](const Jump& j) { return j.to > k; });
  }
  return finite(std::move(rows), name_ + "|K=" + std::to_string(k));
}

AbsorbedChainModel AbsorbedChainModel::restricted(std::size_t k) const {
  if (rows_ && rows_->size() <= k) return *this;
  return truncated(k);
}

AbsorbedChainModel AbsorbedChainModel::with_bounds(Bounds bounds) const {
  AbsorbedChainModel m = *this;
  m.bounds_ = bounds;
  return m;
}

double AbsorbedChainModel::max_total_rate(std::size_t k) const {
  double best = 0.0;
  for (std::size_t x = 1; x <= k; ++x) best = std::max(best, total_rate(static_cast<State>(x)));
  return best;
}

Bounds compute_bounds(const AbsorbedChainModel& model) {
  Bounds b;
  const auto k = model.num_states();
  if (!k) return model.bounds();
  double c0 = 0.0;
  double qbar = 0.0;
  std::vector<double> inflow(*k + 1, 0.0);  // index 0 is the cemetery
  for (std::size_t x = 1; x <= *k; ++x) {
    const Row* r = model.finite_row(static_cast<State>(x));
    c0 = std::max(c0, r->absorb);
    qbar = std::max(qbar, r->jump_total());
    inflow[0] += r->absorb;
    for (const Jump& j : r->jumps) {
      if (j.to <= *k) inflow[j.to] += j.rate;
    }
  }
  b.c0 = c0;
  b.qbar = qbar;
  b.column = *std::max_element(inflow.begin(), inflow.end());
  return b;
}

std::vector<std::string> validate_model(const AbsorbedChainModel& model,
                                        std::span<const State> states) {
  std::vector<std::string> out;
  std::map<State, double> inflow;
  double absorb_inflow = 0.0;
  const std::set<State> in_set(states.begin(), states.end());
  const Bounds& b = model.bounds();
  for (State x : states) {
    if (x == kAbsorbing) {
      out.push_back("state 0 is not a valid source state");
      continue;
    }
    const Row r = model.row(x);
    if (!(r.absorb >= 0.0)) out.push_back("negative absorption rate at state " + std::to_string(x));
    for (const Jump& j : r.jumps) {
      if (!(j.rate >= 0.0)) {
        out.push_back("negative rate " + std::to_string(x) + "->" + std::to_string(j.to));
      }
      if (j.to == x) out.push_back("self-loop listed at state " + std::to_string(x));
      if (j.to == kAbsorbing) {
        out.push_back("jump to 0 listed as a transition at state " + std::to_string(x));
      }
      if (in_set.count(j.to)) inflow[j.to] += j.rate;
    }
    absorb_inflow += r.absorb;
    if (b.c0 && r.absorb > *b.c0) out.push_back("C0 exceeded at state " + std::to_string(x));
    if (b.qbar && r.jump_total() > *b.qbar) {
      out.push_back("qbar exceeded at state " + std::to_string(x));
    }
  }
  if (b.column) {
    for (const auto& [x, total] : inflow) {
      if (total > *b.column) out.push_back("column bound exceeded at state " + std::to_string(x));
    }
    if (absorb_inflow > *b.column) out.push_back("column bound exceeded at state 0");
  }
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

AbsorbedChainModel parse_model(std::istream& in, std::string name) {
  std::string line;
  bool header = false;
  std::size_t lineno = 0;
  std::map<std::pair<State, State>, double> rates;
  State max_state = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view body = line;
    if (auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    body = trim(body);
    if (body.empty()) continue;
    const std::string where = name + ":" + std::to_string(lineno);
    if (!header) {
      if (body != "qsdmodel v1") fail(ErrorCode::kParse, where + ": expected header 'qsdmodel v1'");
      header = true;
      continue;
    }
    std::istringstream fields{std::string(body)};
    long long x = 0;
    long long y = 0;
    std::string rate_text;
    std::string extra;
    if (!(fields >> x >> y >> rate_text) || (fields >> extra)) {
      fail(ErrorCode::kParse, where + ": expected 'x y rate'");
    }
    const double rate = parse_double(rate_text, where);
    if (x <= 0 || y < 0 || x > 0xFFFFFFFFLL || y > 0xFFFFFFFFLL) {
      fail(ErrorCode::kParse, where + ": states must be positive integers (y may be 0)");
    }
    if (rate < 0.0) fail(ErrorCode::kNegativeRate, where + ": negative rate");
    if (x == y) fail(ErrorCode::kSelfLoop, where + ": diagonal entries are derived, not listed");
    const auto key = std::make_pair(static_cast<State>(x), static_cast<State>(y));
    if (!rates.emplace(key, rate).second) {
      fail(ErrorCode::kParse, where + ": duplicate pair " + std::to_string(x) + " " + std::to_string(y));
    }
    max_state = std::max({max_state, key.first, key.second});
  }
  if (!header) fail(ErrorCode::kParse, name + ": missing header 'qsdmodel v1'");
  if (max_state == 0) fail(ErrorCode::kParse, name + ": no transitions");
  std::vector<Row> rows(max_state);
  for (const auto& [key, rate] : rates) {
    Row& r = rows[key.first - 1];
    if (key.second == kAbsorbing) {
      r.absorb = rate;
    } else {
      r.jumps.push_back({key.second, rate});
    }
  }
  return AbsorbedChainModel::finite(std::move(rows), std::move(name));
}

AbsorbedChainModel load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kParse, "cannot open model file " + path);
  return parse_model(in, path);
}

void write_model(std::ostream& out, const AbsorbedChainModel& model) {
  const auto k = model.num_states();
  if (!k) fail(ErrorCode::kUnsupported, "only finite models can be written");
  out << "qsdmodel v1\n";
  for (std::size_t x = 1; x <= *k; ++x) {
    const Row* r = model.finite_row(static_cast<State>(x));
    std::vector<Jump> jumps = r->jumps;
    std::sort(jumps.begin(), jumps.end(), [](const Jump& a, const Jump& b) { return a.to < b.to; });
    if (r->absorb > 0.0) out << x << " 0 " << format_double(r->absorb) << '\n';
    for (const Jump& j : jumps) out << x << ' ' << j.to << ' ' << format_double(j.rate) << '\n';
  }
}

std::vector<State> neighbors(const AbsorbedChainModel& model, State from) {
  std::vector<State> out;
  for (const Jump& j : model.row(from).jumps) {
    if (j.rate > 0.0) out.push_back(j.to);
  }
  return out;
}

bool is_irreducible(const AbsorbedChainModel& model) {
  const auto k = model.num_states();
  if (!k) fail(ErrorCode::kUnsupported, "irreducibility check needs a finite model");
  const std::size_t n = *k;
  std::vector<std::vector<State>> fwd(n + 1);
  std::vector<std::vector<State>> bwd(n + 1);
  for (std::size_t x = 1; x <= n; ++x) {
    for (const Jump& j : model.finite_row(static_cast<State>(x))->jumps) {
      if (j.rate > 0.0 && j.to >= 1 && j.to <= n) {
        fwd[x].push_back(j.to);
        bwd[j.to].push_back(static_cast<State>(x));
      }
    }
  }
  auto reaches_all = [n](const std::vector<std::vector<State>>& adj) {
    std::vector<char> seen(n + 1, 0);
    std::vector<State> stack{1};
    seen[1] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
      const State s = stack.back();
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
  return reaches_all(fwd) && reaches_all(bwd);
}

}  // namespace qsd
