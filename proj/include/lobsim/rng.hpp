#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>

namespace lobsim {

constexpr std::uint64_t fmix64(std::uint64_t x) noexcept {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

// Counter-based generator: output i is a pure function of (key, i), so
// independent substreams come from distinct keys and any position can be
// reproduced without replaying the prefix.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  constexpr explicit CounterRng(std::uint64_t key = 0, std::uint64_t counter = 0) noexcept
      : key_(key), counter_(counter) {}

  // Substream for run `index` of a grid seeded with `master_seed`.
  static constexpr CounterRng substream(std::uint64_t master_seed, std::uint64_t index) noexcept {
    return CounterRng(fmix64(fmix64(master_seed) ^ (index * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL)));
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept {
    const std::uint64_t c = counter_++;
    return fmix64(key_ ^ fmix64(c * 0x9e3779b97f4a7c15ULL + 0xd1b54a32d192ed03ULL));
  }

  // Uniform on [0, 1) with 53 bits of resolution.
  constexpr double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1].
  constexpr double uniform_open0() noexcept { return 1.0 - uniform(); }

  constexpr std::uint64_t key() const noexcept { return key_; }
  constexpr std::uint64_t counter() const noexcept { return counter_; }

  friend constexpr bool operator==(const CounterRng&, const CounterRng&) = default;

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

// Unbiased-enough index in [0, n) for any 64-bit generator (Lemire multiply-shift).
template <class Rng>
std::size_t uniform_index(Rng& rng, std::size_t n) {
  static_assert(Rng::max() == std::numeric_limits<std::uint64_t>::max() && Rng::min() == 0,
                "uniform_index requires a full 64-bit generator");
  const unsigned __int128 wide = static_cast<unsigned __int128>(rng()) * n;
  return static_cast<std::size_t>(wide >> 64);
}

}  // namespace lobsim
