#include "qsd/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "qsd/error.hpp"
#include "qsd/format.hpp"
#include "qsd/model_zoo.hpp"
#include "qsd/oracle.hpp"

namespace qsd {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void invalid(std::size_t line, const std::string& msg) {
  fail(ErrorCode::kConfigInvalid, "line " + std::to_string(line) + ": " + msg);
}

}  // namespace

const std::map<std::string, std::vector<std::string>>& method_parameters() {
  static const std::map<std::string, std::vector<std::string>> params = {
      {"oracle", {"trunc", "tol"}},
      {"conditioned", {"init", "horizon", "dt", "trunc", "grid"}},
      {"fv", {"init", "particles", "horizon", "burnin", "grid", "mode", "trunc"}},
      {"phi", {"init", "iters", "tol", "trunc"}},
      {"afp", {"uniformization-rate", "steps", "start", "checkpoints", "trunc"}},
      {"branch", {"alpha", "horizon", "cap", "restarts", "founder", "trunc"}},
      {"couple", {"init", "particles", "horizon", "dt", "grid", "trunc"}},
      {"scan", {"init", "particles", "horizon", "state", "dt", "trunc"}},
      {"report", {"trunc", "particles", "burnin", "horizon", "iters", "steps", "branch-horizon", "cap",
                  "branch-replicas"}},
  };
  return params;
}

std::optional<std::string> ExperimentConfig::param(const std::string& key) const {
  auto s = sections.find(method);
  if (s == sections.end()) return std::nullopt;
  auto it = s->second.find(key);
  if (it == s->second.end()) return std::nullopt;
  return it->second;
}

double ExperimentConfig::number(const std::string& key, double fallback) const {
  const auto v = param(key);
  if (!v) return fallback;
  try {
    return parse_double(*v, "[" + method + "] " + key);
  } catch (const Error& e) {
    fail(ErrorCode::kConfigInvalid, e.what());
  }
}

std::uint64_t ExperimentConfig::count(const std::string& key, std::uint64_t fallback) const {
  const auto v = param(key);
  if (!v) return fallback;
  // 1e6-style counts are accepted as long as they are integral
  double d = -1.0;
  try {
    d = parse_double(*v, key);
  } catch (const Error&) {
  }
  if (!(d >= 0.0) || std::floor(d) != d || d > 9e18) {
    fail(ErrorCode::kConfigInvalid, "[" + method + "] " + key + ": expected a nonnegative integer, got '" + *v + "'");
  }
  return static_cast<std::uint64_t>(d);
}

std::string ExperimentConfig::text(const std::string& key, const std::string& fallback) const {
  return param(key).value_or(fallback);
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig cfg;
  std::string line;
  std::size_t no = 0;
  bool header = false;
  std::string section;
  while (std::getline(in, line)) {
    ++no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (!header) {
      if (t.rfind("qsdconfig ", 0) != 0) invalid(no, "expected header 'qsdconfig v1'");
      const std::string v = trim(std::string_view(t).substr(10));
      if (v != "v1") invalid(no, "unsupported schema version '" + v + "'");
      header = true;
      continue;
    }
    if (t.front() == '[') {
      if (t.back() != ']') invalid(no, "unterminated section header");
      section = trim(std::string_view(t).substr(1, t.size() - 2));
      if (!method_parameters().count(section)) invalid(no, "unknown section [" + section + "]");
      cfg.sections[section];
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) invalid(no, "expected key = value");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) invalid(no, "empty key");
    if (section.empty()) {
      if (key == "model") {
        cfg.model = value;
      } else if (key == "method") {
        cfg.method = value;
      } else if (key == "seed") {
        try {
          const long long s = parse_int(value, "seed");
          if (s < 0) throw Error(ErrorCode::kParse, "negative");
          cfg.seed = static_cast<std::uint64_t>(s);
        } catch (const Error&) {
          invalid(no, "seed: expected a nonnegative integer, got '" + value + "'");
        }
      } else if (key == "replicas") {
        try {
          const long long r = parse_int(value, "replicas");
          if (r < 1) throw Error(ErrorCode::kParse, "nonpositive");
          cfg.replicas = static_cast<std::size_t>(r);
        } catch (const Error&) {
          invalid(no, "replicas: expected a positive integer, got '" + value + "'");
        }
      } else if (key == "output") {
        if (value.find('/') != std::string::npos) invalid(no, "output: must be a file stem, not a path");
        cfg.output = value;
      } else {
        invalid(no, "unknown key '" + key + "'");
      }
    } else {
      const auto& known = method_parameters().at(section);
      if (std::find(known.begin(), known.end(), key) == known.end()) {
        invalid(no, "unknown key '" + key + "' in [" + section + "]");
      }
      auto& sec = cfg.sections[section];
      if (sec.count(key)) invalid(no, "duplicate key '" + key + "' in [" + section + "]");
      sec[key] = value;
    }
  }
  if (!header) fail(ErrorCode::kConfigInvalid, "empty config (missing 'qsdconfig v1' header)");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kConfigInvalid, "cannot open config " + path);
  return parse_config(in);
}

std::string emit_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "qsdconfig v" << cfg.schema_version << "\n";
  if (!cfg.model.empty()) out << "model = " << cfg.model << "\n";
  if (!cfg.method.empty()) out << "method = " << cfg.method << "\n";
  if (cfg.seed) out << "seed = " << *cfg.seed << "\n";
  out << "replicas = " << cfg.replicas << "\n";
  if (!cfg.output.empty()) out << "output = " << cfg.output << "\n";
  for (const auto& [name, keys] : cfg.sections) {
    out << "\n[" << name << "]\n";
    for (const auto& [k, v] : keys) out << k << " = " << v << "\n";
  }
  return out.str();
}

void validate_config(const ExperimentConfig& cfg) {
  std::vector<std::string> problems;
  if (cfg.schema_version != ExperimentConfig::kSchemaVersion) problems.push_back("schema version not recognized");
  if (!cfg.seed) problems.push_back("seed: missing (mandatory)");
  if (cfg.method.empty()) {
    problems.push_back("method: missing");
  } else if (!method_parameters().count(cfg.method)) {
    problems.push_back("method: unknown '" + cfg.method + "'");
  }
  if (cfg.model.empty()) {
    problems.push_back("model: missing");
  } else {
    try {
      model_from_spec(cfg.model);
    } catch (const Error& e) {
      problems.push_back("model: " + std::string(e.what()));
    }
  }
  for (const auto& [name, keys] : cfg.sections) {
    auto known = method_parameters().find(name);
    if (known == method_parameters().end()) {
      problems.push_back("section [" + name + "] unknown");
      continue;
    }
    for (const auto& [k, v] : keys) {
      if (std::find(known->second.begin(), known->second.end(), k) == known->second.end()) {
        problems.push_back("[" + name + "] " + k + ": unknown key");
      }
    }
  }
  if (!problems.empty()) {
    std::string msg = "invalid config:";
    for (const auto& p : problems) msg += "\n  " + p;
    fail(ErrorCode::kConfigInvalid, msg);
  }
}

Distribution parse_distribution_spec(const std::string& spec, const AbsorbedChainModel& model) {
  auto state = [&](std::string_view s) {
    const long long v = parse_int(trim(s), "state in '" + spec + "'");
    if (v < 1) fail(ErrorCode::kParse, "state must be >= 1 in '" + spec + "'");
    return static_cast<State>(v);
  };
  if (spec == "qsd") {
    const auto k = model.num_states();
    if (!k) fail(ErrorCode::kParse, "'qsd' needs a finite model");
    return solve_qsd_power(model, *k).nu;
  }
  const auto colon = spec.find(':');
  if (colon == std::string::npos) fail(ErrorCode::kParse, "unknown distribution '" + spec + "'");
  const std::string kind = spec.substr(0, colon);
  const std::string_view body = std::string_view(spec).substr(colon + 1);
  if (kind == "delta") return Distribution::delta(state(body));
  if (kind == "uniform") {
    const auto dash = body.find('-');
    if (dash == std::string_view::npos) fail(ErrorCode::kParse, "expected uniform:a-b in '" + spec + "'");
    const State a = state(body.substr(0, dash));
    const State b = state(body.substr(dash + 1));
    if (b < a) fail(ErrorCode::kParse, "empty range in '" + spec + "'");
    std::vector<State> s;
    for (State x = a; x <= b; ++x) s.push_back(x);
    return Distribution::uniform(s);
  }
  if (kind == "weights") {
    std::vector<Distribution::Entry> w;
    std::size_t pos = 0;
    while (pos <= body.size()) {
      auto comma = body.find(',', pos);
      if (comma == std::string_view::npos) comma = body.size();
      const std::string_view item = body.substr(pos, comma - pos);
      const auto eq = item.find('=');
      if (eq == std::string_view::npos) fail(ErrorCode::kParse, "expected x=w in '" + spec + "'");
      w.push_back({state(item.substr(0, eq)), parse_double(trim(item.substr(eq + 1)), "weight in '" + spec + "'")});
      pos = comma + 1;
    }
    return Distribution::from_weights(std::move(w));
  }
  fail(ErrorCode::kParse, "unknown distribution kind '" + kind + "'");
}

}  // namespace qsd
