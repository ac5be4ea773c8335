#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace smoothfix {

// SplitMix64 finalizer. Used both to whiten seeds and to hash tree addresses.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed of the sub-stream with the given index. Sub-streams of one master seed
// are what make results independent of the number of workers.
constexpr std::uint64_t derive_seed(std::uint64_t master,
                                    std::uint64_t index) noexcept {
  return mix64(master ^ mix64(index + 0x632be59bd9b4e019ULL));
}

// Counter-based SplitMix64 stream. Cheap to construct, so every tree vertex
// and every Monte Carlo replication owns one. Satisfies
// UniformRandomBitGenerator for use with <random> distributions.
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit constexpr Stream(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform on the open interval (0, 1).
  double uniform() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept {
    return lo + (hi - lo) * uniform();
  }

  double exponential() noexcept { return -std::log(uniform()); }

  // Uniform index in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) %
           n;
  }

  Stream split(std::uint64_t index) const noexcept {
    return Stream(derive_seed(state_, index));
  }

 private:
  std::uint64_t state_;
};

}  // namespace smoothfix
