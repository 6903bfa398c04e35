#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace svytree {

/// SplitMix64 finalizer. Used to derive independent seeds from counters.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of replicate `replicate` in stream `stream`:
///   splitmix64(base ^ splitmix64((stream << 32) | replicate)).
/// Streams separate sample sizes; the mapping never depends on scheduling.
constexpr std::uint64_t replicate_seed(std::uint64_t base, std::uint32_t stream,
                                       std::uint32_t replicate) noexcept {
  const std::uint64_t counter =
      (static_cast<std::uint64_t>(stream) << 32) | replicate;
  return splitmix64(base ^ splitmix64(counter));
}

/// Portable random stream. The engine is std::mt19937_64 seeded with the
/// single 64-bit value (its output sequence is fixed by the standard); all
/// derived variates are computed here rather than with <random>
/// distributions, whose algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer on [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound);

  /// Poisson variate. Inversion for mean < 10, Hormann's PTRS otherwise.
  std::uint64_t poisson(double mean);

  /// Index drawn with probability proportional to cumulative[i] - cumulative[i-1].
  /// `cumulative` is nondecreasing with positive last element.
  std::size_t categorical(std::span<const double> cumulative);

 private:
  std::mt19937_64 engine_;
};

}  // namespace svytree
