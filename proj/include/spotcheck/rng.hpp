#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace spotcheck {

using Seed = std::uint64_t;

std::uint64_t splitmix64(std::uint64_t x);

/// Independent child seed for a numbered sub-stream of `base`.
Seed derive_seed(Seed base, std::uint64_t stream);

/// Platform-stable random source. The engine's output sequence is fixed by the
/// standard; the distributions below are implemented here because the standard
/// library ones are not reproducible across implementations.
class Rng {
 public:
  explicit Rng(Seed seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, n). n must be positive.
  std::uint64_t index(std::uint64_t n);

  /// Uniform in [lo, hi] inclusive.
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(index(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  bool coin() { return (next() >> 63) != 0; }

  /// Standard normal via Box-Muller; the spare deviate is cached.
  double normal();

  template <class T>
  const T& pick(const std::vector<T>& items) {
    return items[index(items.size())];
  }

  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace spotcheck
