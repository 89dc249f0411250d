#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace clickrender {

/// Stateless counter-based generator. Every draw is a pure function of
/// (key, counter), so parallel or replayed evaluation yields identical values.
class CounterRng {
 public:
  constexpr explicit CounterRng(std::uint64_t key) : key_(key) {}

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Derive an independent child stream.
  constexpr CounterRng split(std::uint64_t tag) const { return CounterRng(mix(key_ ^ mix(tag + 0x632be59bd9b4e019ULL))); }

  constexpr std::uint64_t bits(std::uint64_t counter) const { return mix(key_ + mix(counter)); }

  /// Uniform in [0, 1).
  constexpr double uniform(std::uint64_t counter) const {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). Multiply-shift reduction; bias is below 2^-32 for n < 2^32.
  std::uint64_t below(std::uint64_t counter, std::uint64_t n) const {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(bits(counter)) * n) >> 64);
  }

  /// Standard normal via Box-Muller on two counters.
  double normal(std::uint64_t counter) const {
    const double u1 = 1.0 - uniform(2 * counter);
    const double u2 = uniform(2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  constexpr std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
};

/// FNV-1a, for keying streams by string identifiers.
constexpr std::uint64_t hash_string(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Fisher-Yates with a counter stream. std::shuffle's algorithm is unspecified,
/// which would break cross-platform replay.
template <typename T>
void shuffle(std::vector<T>& items, const CounterRng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i, i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace clickrender
