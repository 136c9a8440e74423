#pragma once

// Counter-based RNG with named substreams. A substream is derived by folding
// a path of 64-bit words onto the master seed, so e.g. (candidate, replicate)
// owns its own stream and results do not depend on scheduling or worker count.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace screenopt {

inline constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

// splitmix64 finalizer
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_stream(std::uint64_t master,
                                   std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix64(master + kGoldenGamma);
  for (std::uint64_t w : path) s = mix64(s ^ (w + kGoldenGamma));
  return s;
}

// Stream domain tags; keep values stable, they are part of the output contract.
namespace streams {
inline constexpr std::uint64_t kWorld = 0x01;
inline constexpr std::uint64_t kStage1Noise = 0x02;
inline constexpr std::uint64_t kStage2Noise = 0x03;
inline constexpr std::uint64_t kScreen = 0x04;
inline constexpr std::uint64_t kEstimation = 0x05;
inline constexpr std::uint64_t kBaselineOne = 0x06;
inline constexpr std::uint64_t kBaselineTwo = 0x07;
inline constexpr std::uint64_t kStudy = 0x08;
}  // namespace streams

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += kGoldenGamma;
    return mix64(state_);
  }

  // uniform on (0, 1]; never 0 so log() is safe
  double next_unit() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  bool next_bernoulli(double p) { return next_unit() <= p; }

  // Box-Muller; the spare is cached, draws come in deterministic order
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = next_unit();
    const double u2 = next_unit();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace screenopt
