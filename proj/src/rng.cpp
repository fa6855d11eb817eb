#include "qsd/rng.hpp"

#include <cmath>

#include "qsd/error.hpp"

namespace qsd {
namespace {

constexpr std::uint32_t kW0 = 0x9E3779B9;
constexpr std::uint32_t kW1 = 0xBB67AE85;
constexpr std::uint32_t kM0 = 0xD2511F53;
constexpr std::uint32_t kM1 = 0xCD9E8D57;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

RngStream::RngStream(std::uint64_t seed,
                     std::initializer_list<std::uint64_t> path)
    : seed_(seed), path_(path) {
  rekey();
}

RngStream::RngStream(std::uint64_t seed, std::vector<std::uint64_t> path)
    : seed_(seed), path_(std::move(path)) {
  rekey();
}

void RngStream::rekey() {
  // Two independent hash chains over the path: one becomes the Philox key,
  // the other occupies the high half of the counter.
  std::uint64_t a = splitmix(seed_);
  std::uint64_t b = splitmix(seed_ ^ 0x5851F42D4C957F2DULL);
  for (std::uint64_t p : path_) {
    a = splitmix(a ^ splitmix(p + 0x632BE59BD9B4E019ULL));
    b = splitmix(b + splitmix(p ^ 0x8CB92BA72F3D8DD7ULL));
  }
  key_ = {static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32)};
  tag_ = b;
  counter_ = 0;
  have_spare_ = false;
}

RngStream RngStream::child(std::uint64_t id) const {
  std::vector<std::uint64_t> p = path_;
  p.push_back(id);
  return RngStream(seed_, std::move(p));
}

RngStream::result_type RngStream::operator()() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  const auto out = philox4x32(
      {static_cast<std::uint32_t>(counter_),
       static_cast<std::uint32_t>(counter_ >> 32),
       static_cast<std::uint32_t>(tag_), static_cast<std::uint32_t>(tag_ >> 32)},
      key_);
  ++counter_;
  spare_ = (std::uint64_t{out[3]} << 32) | out[2];
  have_spare_ = true;
  return (std::uint64_t{out[1]} << 32) | out[0];
}

double RngStream::uniform() {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

double RngStream::exponential(double rate) {
  if (!(rate > 0.0)) fail(ErrorCode::kInvalidArgument, "exponential rate must be positive");
  return -std::log(uniform_pos()) / rate;
}

std::uint64_t RngStream::below(std::uint64_t n) {
  if (n == 0) fail(ErrorCode::kInvalidArgument, "below(0)");
  // Lemire's nearly divisionless method.
  std::uint64_t x = (*this)();
  __uint128_t m = static_cast<__uint128_t>(x) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = -n % n;
    while (low < threshold) {
      x = (*this)();
      m = static_cast<__uint128_t>(x) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

}  // namespace qsd
