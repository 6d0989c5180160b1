#pragma once

#include <cstdint>
#include <random>

namespace dmpcq {

/// splitmix64 step, used to derive independent stream seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seedable random stream with portable uniform draws. The mt19937_64 engine
/// is fully specified by the standard and the [0,1) mapping below uses the
/// top 53 bits, so sequences are identical across platforms and compilers.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n), rejection sampled to avoid modulo bias.
  std::uint64_t uniform_index(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

/// Derives a child stream from (master, domain, index). Distinct (domain,
/// index) pairs give statistically independent streams; the derivation is
/// deterministic so whole experiments replay bit-identically from one seed.
inline RngStream derive_stream(std::uint64_t master, std::uint64_t domain,
                               std::uint64_t index) {
  std::uint64_t s = master;
  std::uint64_t a = splitmix64(s);
  s ^= domain * 0x9e3779b97f4a7c15ULL;
  std::uint64_t b = splitmix64(s);
  s ^= (index + 1) * 0xd1b54a32d192ed03ULL;
  std::uint64_t c = splitmix64(s);
  return RngStream(a ^ (b << 1) ^ c);
}

}  // namespace dmpcq
