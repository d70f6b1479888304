#pragma once

#include <cstdint>

// Counter-based randomness. Every consumer derives an independent stream
// from (seed, counter) through an avalanche mixer, so sample i looks the
// same no matter which thread produced it or what ran before it.

namespace rhm {

// splitmix64 finalizer (Vigna's constants). Bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Stream seed for (seed, stream_id). Distinct ids give unrelated streams.
inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t stream_id) {
    return mix64(seed ^ mix64(stream_id + 0x9E3779B97F4A7C15ULL));
}

// Folds one more coordinate into a seed; chain for multi-part cell keys.
inline std::uint64_t seed_chain(std::uint64_t h, std::uint64_t x) {
    return mix64((h ^ x) + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2));
}

class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Unbiased draw from {0..bound-1}, bound >= 1. Lemire multiply-shift
    // with rejection; avoids std distributions so streams reproduce across
    // standard libraries.
    std::uint64_t next_below(std::uint64_t bound) {
        unsigned __int128 m = static_cast<unsigned __int128>(next()) * bound;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (lo < threshold) {
                m = static_cast<unsigned __int128>(next()) * bound;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    // Uniform in [0,1) with 53-bit resolution.
    double next_double() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

  private:
    std::uint64_t state_;
};

}  // namespace rhm
