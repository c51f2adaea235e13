#pragma once

// Counter-based random numbers. Every stochastic site draws from a stream
// keyed by (global seed, site id), so results do not depend on call order
// across sites or on the standard library's distribution implementations.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace tea {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// FNV-1a, used to turn readable site names into site ids.
inline constexpr std::uint64_t site_id(std::string_view name) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t site) noexcept
      : key_(splitmix64(splitmix64(seed) ^ splitmix64(site + 0x632BE59BD9B4E019ull))) {}
  Rng(std::uint64_t seed, std::string_view site) noexcept : Rng(seed, site_id(site)) {}
  Rng(std::uint64_t seed, std::string_view site, std::uint64_t sub) noexcept
      : Rng(seed, splitmix64(site_id(site)) ^ sub) {}

  std::uint64_t next_u64() noexcept { return splitmix64(key_ ^ splitmix64(counter_++)); }

  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept {
    // Lemire's multiply-shift; the tiny bias is irrelevant at our sizes.
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  /// Standard normal via Box-Muller (no cached second value, so the stream
  /// position is a pure function of the number of draws).
  double normal() noexcept {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  template <typename Vec>
  void shuffle(Vec& v) noexcept {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = below(i);
      using std::swap;
      swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace tea
