#pragma once

#include <cmath>
#include <cstdint>

namespace cage {

// Murmur3-style 64-bit finalizer. Bijective, so distinct inputs give
// distinct outputs.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    x *= 0xc4ceb9fe1a85ec53ULL;
    x ^= x >> 33;
    return x;
}

// Derives an independent child seed from (seed, tag). Used to give each
// outer Monte Carlo iteration / cache subset its own stream family.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    return mix64(seed ^ mix64(tag + 0x9e3779b97f4a7c15ULL));
}

// Counter-based generator: the state is a strong hash of (seed, stream),
// advanced as a splitmix64 sequence. Streams are placed pseudo-randomly in
// the 2^64 Weyl cycle, so per-row / per-iteration streams are independent
// and results do not depend on evaluation order or worker count.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
        : state_(mix64(mix64(seed + 0x9e3779b97f4a7c15ULL) ^
                       mix64(stream ^ 0xd1b54a32d192ed03ULL))),
          has_cached_(false),
          cached_(0.0) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ULL;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return z;
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1]; safe as a log() argument.
    double uniform_open() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    // Uniform integer in [0, n), unbiased via bitmask rejection.
    std::uint64_t uniform_int(std::uint64_t n) {
        if (n <= 1) return 0;
        std::uint64_t mask = ~std::uint64_t{0} >> __builtin_clzll((n - 1) | 1);
        for (;;) {
            std::uint64_t v = next_u64() & mask;
            if (v < n) return v;
        }
    }

    // Standard normal via Box-Muller; the second deviate of each pair is
    // cached so consecutive calls consume one uniform pair per two normals.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = uniform_open();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(theta);
        has_cached_ = true;
        return r * std::cos(theta);
    }

private:
    std::uint64_t state_;
    bool has_cached_;
    double cached_;
};

}  // namespace cage
