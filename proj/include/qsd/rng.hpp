#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <vector>

namespace qsd {

/// Tags for the last component of a stream path. Keeping them in one place
/// prevents two subsystems from silently sharing draws.
enum class Purpose : std::uint64_t {
  kInit = 1,
  kDynamics = 2,
  kInternalMarks = 3,
  kVoterMarks = 4,
  kCoupling = 5,
  kReturn = 6,
  kBranching = 7,
  kDownsample = 8,
  kAfp = 9,
};

/// Philox4x32-10 block function (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Counter-based random stream keyed by (root seed, path). Draw k of a stream
/// is a pure function of (seed, path, k), so replicas, particles and purposes
/// each get an independent stream without any shared state, and a run can be
/// replayed bit for bit.
///
/// Satisfies UniformRandomBitGenerator so it can feed <random> distributions.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t seed,
                     std::initializer_list<std::uint64_t> path = {});
  RngStream(std::uint64_t seed, std::vector<std::uint64_t> path);

  /// Stream whose path is this path extended by `id`. Starts at draw 0.
  RngStream child(std::uint64_t id) const;
  RngStream child(Purpose purpose) const {
    return child(static_cast<std::uint64_t>(purpose));
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }
  result_type operator()();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1]; safe to take the log of.
  double uniform_pos() { return 1.0 - uniform(); }
  /// Exponential with the given rate; rate must be positive.
  double exponential(double rate);
  /// Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);

  std::uint64_t seed() const { return seed_; }
  const std::vector<std::uint64_t>& path() const { return path_; }
  std::uint64_t draws() const { return counter_ * 2 + (have_spare_ ? 1 : 0); }

 private:
  void rekey();

  std::uint64_t seed_;
  std::vector<std::uint64_t> path_;
  std::array<std::uint32_t, 2> key_{};
  std::uint64_t tag_ = 0;
  std::uint64_t counter_ = 0;
  std::uint64_t spare_ = 0;
  bool have_spare_ = false;
};

}  // namespace qsd
