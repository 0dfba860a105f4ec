#ifndef REGEN_SRS_RNG_HPP
#define REGEN_SRS_RNG_HPP

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>

namespace regen_srs {

/// Counter-based generator: draw i of stream (seed, stream) is a pure function
/// of (seed, stream, i). Streams never share state, so results do not depend on
/// how replications are scheduled across threads.
///
/// The output function is the SplitMix64 finalizer applied to a Weyl sequence
/// whose offset is derived from the key; this satisfies UniformRandomBitGenerator.
class CounterRng {
public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : key_(mix(mix(seed ^ 0x6a09e667f3bcc908ULL) + stream * 0x9e3779b97f4a7c15ULL)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Index drawn from a cumulative probability table (last entry treated as 1).
  std::size_t pick(std::span<const double> cumulative) {
    const double u = uniform();
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end() - 1, u);
    return static_cast<std::size_t>(it - cumulative.begin());
  }

  std::uint64_t counter() const noexcept { return counter_; }

private:
  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace regen_srs

#endif  // REGEN_SRS_RNG_HPP
