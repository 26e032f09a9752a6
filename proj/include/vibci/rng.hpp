#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace vibci {

// Seed derivation used by every stochastic component.
//
// derive_seed(master, component, index) = splitmix64(master ^ fnv1a64(component)
// ^ splitmix64(index)). Components are named after the stage that consumes the
// stream ("synth.background", "train.shuffle", ...), so any sub-result can be
// reproduced without replaying the streams that precede it.
std::uint64_t derive_seed(std::uint64_t master, std::string_view component,
                          std::uint64_t index = 0);

// Portable random source. std::mt19937_64 output is fully specified by the
// standard; the distributions below are implemented here because the
// std:: distribution algorithms differ between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal (Box-Muller; the second variate is cached).
  double normal();

  // Uniform integer in [0, n). Requires n > 0.
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double cached_normal_{0.0};
  bool has_cached_{false};
};

}  // namespace vibci
