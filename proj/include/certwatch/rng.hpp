#pragma once

// Counter-based pseudo-random generator used everywhere in certwatch.
//
// The stream is a pure function of (seed, counter): output_i is the
// SplitMix64 finalizer applied to seed + (i+1) * 0x9E3779B97F4A7C15.
// Any implementation in any language that follows this recipe reproduces
// the streams bit-exactly, which is what makes all runs reproducible.

#include <cstdint>

namespace certwatch {

class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed = 0) : seed_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = seed_ + (++counter_) * 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 24 bits of mantissa (exact in float).
    float next_float() {
        return static_cast<float>(next_u64() >> 40) * (1.0f / 16777216.0f);
    }

    double next_double() {
        return static_cast<double>(next_u64() >> 11) * (1.0 / 9007199254740992.0);
    }

    float uniform(float lo, float hi) { return lo + (hi - lo) * next_float(); }

    // Unbiased integer in [0, n) via rejection.
    std::uint64_t next_below(std::uint64_t n) {
        if (n == 0) return 0;
        std::uint64_t limit = ~std::uint64_t(0) - (~std::uint64_t(0) % n);
        std::uint64_t v;
        do { v = next_u64(); } while (v >= limit);
        return v % n;
    }

    std::uint64_t seed() const { return seed_; }

    // Independent stream derived from a parent seed and a tag. Mixing goes
    // through the same finalizer, so derived streams never collide with the
    // parent stream for practical purposes.
    static CounterRng derive(std::uint64_t seed, std::uint64_t tag) {
        CounterRng mixer(seed ^ (tag * 0xD1B54A32D192ED03ULL));
        return CounterRng(mixer.next_u64());
    }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

// FNV-1a over raw bytes; used for file checksums and config digests.
inline std::uint64_t fnv1a64(const void* bytes, std::size_t n,
                             std::uint64_t h = 0xCBF29CE484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ULL;
    }
    return h;
}

} // namespace certwatch
