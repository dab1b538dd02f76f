#pragma once

#include <cmath>
#include <cstdint>

namespace rarecell {

// Identifies one replicate's random stream. Streams are pure functions of
// (master_seed, replicate_index, domain), so campaigns replay identically
// under any parallel schedule and any worker count.
struct seed_spec {
    std::uint64_t master_seed = 0;
    std::uint64_t replicate_index = 0;
};

// Separates independent uses of the same replicate's randomness (tile
// counts vs. display jitter vs. scalar variates).
enum class stream_domain : std::uint64_t {
    counts = 0,
    jitter = 1,
    variates = 2,
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

class xoshiro256pp {
public:
    xoshiro256pp() : s_{1, 2, 3, 4} {}
    explicit xoshiro256pp(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }
    xoshiro256pp(std::uint64_t s0, std::uint64_t s1, std::uint64_t s2, std::uint64_t s3)
        : s_{s0, s1, s2, s3} {}

    std::uint64_t next() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1), 53-bit resolution.
    double unit() { return (next() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1]; safe under log().
    double unit_open() { return ((next() >> 11) + 1) * 0x1.0p-53; }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::uint64_t s_[4];
};

// Counter-based stream derivation: hashes (master_seed, replicate_index,
// domain) into a full 256-bit state. Distinct inputs give statistically
// independent streams; equal inputs give identical streams.
xoshiro256pp derive_stream(seed_spec seed, stream_domain domain = stream_domain::counts);

// Standard normal via the 128-layer ziggurat method.
double draw_unit_normal(xoshiro256pp& gen);

// Exponential with mean 1 via inversion.
inline double draw_unit_exponential(xoshiro256pp& gen) {
    return -std::log(gen.unit_open());
}

}
