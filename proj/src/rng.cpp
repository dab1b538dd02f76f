#include "rarecell/rng.hpp"

#include <cstdlib>

namespace rarecell {

xoshiro256pp derive_stream(seed_spec seed, stream_domain domain) {
    // Feed all three identifiers through splitmix64 so that neighbouring
    // replicate indices land in unrelated regions of the state space.
    std::uint64_t sm = seed.master_seed;
    std::uint64_t a = splitmix64(sm);
    sm ^= 0x6a09e667f3bcc909ull + seed.replicate_index;
    std::uint64_t b = splitmix64(sm);
    sm ^= 0xbb67ae8584caa73bull + static_cast<std::uint64_t>(domain);
    std::uint64_t c = splitmix64(sm);
    std::uint64_t d = splitmix64(sm);
    // xoshiro must not start from the all-zero state.
    if ((a | b | c | d) == 0)
        d = 0x9e3779b97f4a7c15ull;
    return xoshiro256pp(a, b, c, d);
}

namespace {

// 128-layer ziggurat for the standard normal (Marsaglia and Tsang layout).
// r is the base strip boundary, v the common layer area.
struct zig_tables {
    double x[129];
    double f[129];
    double w[128];
    std::uint64_t k[128];

    zig_tables() {
        constexpr double r = 3.442619855899;
        constexpr double v = 9.91256303526217e-3;
        const double fr = std::exp(-0.5 * r * r);
        x[0] = v / fr; // pseudo-width of the base strip including the tail
        x[1] = r;
        for (int i = 2; i < 128; ++i) {
            const double fi = std::exp(-0.5 * x[i - 1] * x[i - 1]) + v / x[i - 1];
            x[i] = std::sqrt(-2.0 * std::log(fi));
        }
        x[128] = 0.0;
        for (int i = 0; i <= 128; ++i) f[i] = std::exp(-0.5 * x[i] * x[i]);
        for (int i = 0; i < 128; ++i) {
            w[i] = x[i] * 0x1.0p-51;
            k[i] = static_cast<std::uint64_t>((x[i + 1] / x[i]) * 0x1.0p51);
        }
    }
};

const zig_tables& zig() {
    static const zig_tables tables;
    return tables;
}

} // namespace

double draw_unit_normal(xoshiro256pp& gen) {
    const zig_tables& z = zig();
    for (;;) {
        const std::uint64_t u = gen.next();
        const int i = static_cast<int>(u & 127);
        // signed 52-bit coordinate, |j| < 2^51
        const std::int64_t j =
            static_cast<std::int64_t>(u >> 12) - (std::int64_t{1} << 51);
        const double value = static_cast<double>(j) * z.w[i];
        const std::uint64_t aj = static_cast<std::uint64_t>(j < 0 ? -j : j);
        if (aj < z.k[i])
            return value; // wholly inside the next layer: accept without pdf work
        if (i == 0) {
            // base strip: sample the tail beyond r by Marsaglia's method
            double a, b;
            do {
                a = -std::log(gen.unit_open()) / z.x[1];
                b = -std::log(gen.unit_open());
            } while (b + b < a * a);
            return j > 0 ? z.x[1] + a : -(z.x[1] + a);
        }
        // wedge region: accept under the density
        const double y = z.f[i] + gen.unit() * (z.f[i + 1] - z.f[i]);
        if (y < std::exp(-0.5 * value * value))
            return value;
    }
}

}
