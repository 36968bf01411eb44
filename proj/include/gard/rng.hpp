#pragma once

#include <cstdint>

namespace gard {

// SplitMix64 (Steele, Lea & Flood 2014). Chosen as the project-wide generator:
// 64-bit state, trivially seedable, passes BigCrush, and splittable, so
// per-image / per-sample streams can be derived from one master seed.
// Reimplementations in other languages can state "SplitMix64" and match the
// construction; bit-exact cross-language output is not a contract here,
// within-build determinism is.
class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform double in [0,1) with 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform double in (0,1); never returns 0 so log() stays finite.
    double next_open_double() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

  private:
    std::uint64_t state_;
};

// Splitting rule: sub-stream i of a master seed is output i of the SplitMix64
// stream seeded with the master seed. Since output i of a stream seeded at s
// is mix(s + (i+1)*GOLDEN), this is O(1). Documented so that parallel
// per-image work can be reproduced from (master_seed, index) alone.
inline std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index) {
    SplitMix64 g(master_seed + index * 0x9e3779b97f4a7c15ULL);
    return g.next_u64();
}

// Standard normal via the Marsaglia polar method.
double sample_normal(SplitMix64& rng);

}  // namespace gard
