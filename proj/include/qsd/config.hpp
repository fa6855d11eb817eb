#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qsd/chain.hpp"
#include "qsd/distribution.hpp"

namespace qsd {

/// Experiment description. On disk:
///
///   qsdconfig v1
///   model = two-state
///   method = fv
///   seed = 7
///   [fv]
///   particles = 400
///
/// Top-level keys are fixed; section keys are checked against the method's
/// parameter list. Values are kept as text and typed on access.
struct ExperimentConfig {
  static constexpr int kSchemaVersion = 1;

  int schema_version = kSchemaVersion;
  std::string model;
  std::string method;
  std::optional<std::uint64_t> seed;
  std::size_t replicas = 1;
  std::string output;  // file stem; the method name when empty
  std::map<std::string, std::map<std::string, std::string>> sections;

  bool operator==(const ExperimentConfig&) const = default;

  std::string stem() const { return output.empty() ? method : output; }
  std::optional<std::string> param(const std::string& key) const;
  double number(const std::string& key, double fallback) const;
  std::uint64_t count(const std::string& key, std::uint64_t fallback) const;
  std::string text(const std::string& key, const std::string& fallback) const;
  void set(const std::string& key, const std::string& value) { sections[method][key] = value; }
};

/// Method names and the parameters each accepts.
const std::map<std::string, std::vector<std::string>>& method_parameters();

/// Throws ConfigInvalid with a line-numbered message.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);
std::string emit_config(const ExperimentConfig& cfg);

/// Field-level checks: seed present, method known, parameters known, model
/// resolvable. Throws ConfigInvalid listing every problem found.
void validate_config(const ExperimentConfig& cfg);

/// `delta:x`, `uniform:a-b`, `weights:x=w,y=w,...`, or `qsd` (the oracle QSD of
/// `model`, which must then be finite).
Distribution parse_distribution_spec(const std::string& spec, const AbsorbedChainModel& model);

}  // namespace qsd
