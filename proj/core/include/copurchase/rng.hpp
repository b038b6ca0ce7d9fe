#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace copurchase {

/// splitmix64 finaliser; used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t x) noexcept;

/// Child seed for stream `index` of `master`. Stable across platforms.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept;

/// mt19937_64 with platform-stable helpers. The standard distributions are
/// implementation-defined, so we draw integers and reals ourselves to keep
/// seeded outputs identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, bound). bound must be > 0.
  std::size_t uniform_index(std::size_t bound);

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01();

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  template <class It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::size_t>(last - first);
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = uniform_index(i);
      using std::swap;
      swap(first[i - 1], first[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace copurchase
