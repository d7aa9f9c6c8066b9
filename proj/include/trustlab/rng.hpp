#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace trustlab {

// SplitMix64 output function.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based generator: draw j of stream s under seed k is
/// mix64(key(k, s) + (j + 1) * gamma), so any draw can be reproduced
/// without replaying the ones before it.
///
/// Streams are cheap; derive one per sequence, user, or bootstrap resample
/// and results stay independent of evaluation order or thread count.
class CounterRng {
public:
  using result_type = std::uint64_t;

  constexpr CounterRng() noexcept = default;
  constexpr explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : seed_(seed), stream_(stream), key_(mix64(seed ^ mix64(stream + kGamma))) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept { return at(counter_++); }

  /// Draw `index` of this stream; does not advance the counter.
  constexpr result_type at(std::uint64_t index) const noexcept {
    return mix64(key_ + (index + 1) * kGamma);
  }

  /// Independent child stream, e.g. one per synthetic user.
  constexpr CounterRng split(std::uint64_t child) const noexcept {
    return CounterRng(seed_, mix64(stream_ * kGamma + child + 1));
  }

  /// Uniform real in [0, 1) with 53 random bits.
  constexpr double uniform01() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n), n > 0. Lemire's multiply-shift with rejection.
  std::uint64_t uniform_index(std::uint64_t n) noexcept {
    if (n <= 1) return 0;
    for (;;) {
      const unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * n;
      const auto low = static_cast<std::uint64_t>(m);
      if (low >= n || low >= (0 - n) % n) return static_cast<std::uint64_t>(m >> 64);
    }
  }

  constexpr bool bernoulli(double p) noexcept { return uniform01() < p; }

  constexpr std::uint64_t seed() const noexcept { return seed_; }
  constexpr std::uint64_t stream() const noexcept { return stream_; }
  constexpr std::uint64_t counter() const noexcept { return counter_; }
  constexpr void set_counter(std::uint64_t c) noexcept { counter_ = c; }

private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
  std::uint64_t key_ = mix64(kGamma);
  std::uint64_t counter_ = 0;
};

// FNV-1a, used for stable per-id hashing (option placement, cache keys).
constexpr std::uint64_t fnv1a64(std::string_view text, std::uint64_t basis = 0xcbf29ce484222325ULL) noexcept {
  std::uint64_t h = basis;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace trustlab
