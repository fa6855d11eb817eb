#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "qsd/distribution.hpp"
#include "qsd/rng.hpp"

namespace qsd {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct Jump {
  State to;
  double rate;
};

/// Outgoing rates of one state. The diagonal q(x,x) is never stored.
struct Row {
  std::vector<Jump> jumps;
  double absorb = 0.0;

  double jump_total() const;
  double total() const { return jump_total() + absorb; }
};

/// Declared model bounds. An empty optional means "not declared"; +inf means
/// declared unbounded.
struct Bounds {
  std::optional<double> c0;      // sup_x q(x,0)
  std::optional<double> qbar;    // sup_x sum_{y != x} q(x,y)
  std::optional<double> column;  // C with sum_y q(y,x) <= C for x in states and 0
};

/// Rate matrix of a jump chain on {1, 2, ...} absorbed at 0.
///
/// Finite models store rows for states 1..K. Lazy models compute rows on
/// demand and may have an unbounded state space. Copies share storage.
class AbsorbedChainModel {
 public:
  using RowFn = std::function<void(State, Row&)>;

  static AbsorbedChainModel finite(std::vector<Row> rows, std::string name);
  static AbsorbedChainModel lazy(RowFn fn, std::string name, Bounds bounds);

  void row(State x, Row& out) const;
  Row row(State x) const;
  double absorb_rate(State x) const;
  double total_rate(State x) const;
  /// q(x,x) = -(sum_y q(x,y) + q(x,0)).
  double diagonal(State x) const { return -total_rate(x); }

  /// K for finite models; empty for unbounded ones.
  std::optional<std::size_t> num_states() const;
  bool is_finite() const { return rows_ != nullptr; }
  const Bounds& bounds() const { return bounds_; }
  const std::string& name() const { return name_; }

  /// Finite model on {1..k}; jumps leaving {1..k} are dropped (the mass they
  /// carried stays in place), absorption is kept.
  AbsorbedChainModel truncated(std::size_t k) const;
  /// Truncated to k if the model is unbounded or larger than k.
  AbsorbedChainModel restricted(std::size_t k) const;
  AbsorbedChainModel with_bounds(Bounds bounds) const;

  /// Largest total rate over {1..k}.
  double max_total_rate(std::size_t k) const;

  /// Direct row access for finite models; nullptr out of range or for lazy models.
  const Row* finite_row(State x) const {
    if (!rows_ || x == 0 || x > rows_->size()) return nullptr;
    return &(*rows_)[x - 1];
  }

 private:
  std::shared_ptr<const std::vector<Row>> rows_;
  std::shared_ptr<const RowFn> fn_;
  Bounds bounds_;
  std::string name_;
};

/// Memoized row lookup for hot simulation loops; single owner.
class RowCache {
 public:
  explicit RowCache(const AbsorbedChainModel& model) : model_(&model) {}

  const Row& get(State x) {
    if (const Row* r = model_->finite_row(x)) return *r;
    if (model_->is_finite()) return empty_;
    auto [it, inserted] = cache_.try_emplace(x);
    if (inserted) model_->row(x, it->second);
    return it->second;
  }

 private:
  const AbsorbedChainModel* model_;
  std::unordered_map<State, Row> cache_;
  Row empty_;
};

/// Checks nonnegative rates, no listed self-loops or explicit jumps to 0, and
/// any declared bounds on the given states. Returns one message per problem.
std::vector<std::string> validate_model(const AbsorbedChainModel& model,
                                        std::span<const State> states);

/// Exact C0, qbar and column bound of a finite model.
Bounds compute_bounds(const AbsorbedChainModel& model);

/// Reads the `qsdmodel v1` text format.
AbsorbedChainModel parse_model(std::istream& in, std::string name);
AbsorbedChainModel load_model_file(const std::string& path);
void write_model(std::ostream& out, const AbsorbedChainModel& model);

/// States reachable from `from` in one jump within the model (absorption excluded).
std::vector<State> neighbors(const AbsorbedChainModel& model, State from);

/// True if {1..K} of a finite model is strongly connected.
bool is_irreducible(const AbsorbedChainModel& model);

}  // namespace qsd
