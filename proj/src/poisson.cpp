#include "rarecell/poisson.hpp"

#include <array>
#include <cmath>

namespace rarecell {

namespace {

constexpr int table_size = 1024;

struct log_factorial_table {
    std::array<double, table_size> value;
    log_factorial_table() {
        long double acc = 0.0L;
        value[0] = 0.0;
        for (int k = 1; k < table_size; ++k) {
            acc += std::log(static_cast<long double>(k));
            value[k] = static_cast<double>(acc);
        }
    }
};

const log_factorial_table& lf_table() {
    static const log_factorial_table t;
    return t;
}

} // namespace

double log_factorial(std::uint64_t k) {
    if (k < table_size)
        return lf_table().value[k];
    // Stirling series; error < 1e-16 for k >= table_size.
    const double n = static_cast<double>(k);
    const double inv = 1.0 / n;
    const double inv2 = inv * inv;
    return (n + 0.5) * std::log(n) - n + 0.9189385332046727 // 0.5*log(2*pi)
           + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0));
}

poisson_gen::poisson_gen(double mean) : mean_(mean) {
    if (mean_ < inversion_cutoff) {
        if (mean_ > 0.0)
            exp_neg_mean_ = std::exp(-mean_);
        return;
    }
    // PTRS (transformed rejection with squeeze), Hormann 1993.
    const double sqrt_mean = std::sqrt(mean_);
    b_ = 0.931 + 2.53 * sqrt_mean;
    a_ = -0.059 + 0.02483 * b_;
    inv_alpha_ = 1.1239 + 1.1328 / (b_ - 3.4);
    v_r_ = 0.9277 - 3.6224 / (b_ - 2.0);
    log_mean_ = std::log(mean_);
}

std::uint32_t poisson_gen::operator()(xoshiro256pp& gen) const {
    if (!(mean_ > 0.0))
        return 0; // degenerate mean consumes no randomness
    if (mean_ < inversion_cutoff) {
        // product-of-uniforms inversion
        std::uint32_t k = 0;
        double prod = gen.unit();
        while (prod > exp_neg_mean_) {
            ++k;
            prod *= gen.unit();
        }
        return k;
    }
    for (;;) {
        const double u = gen.unit() - 0.5;
        const double v = gen.unit();
        const double us = 0.5 - std::abs(u);
        const double kf = std::floor((2.0 * a_ / us + b_) * u + mean_ + 0.43);
        if (us >= 0.07 && v <= v_r_)
            return static_cast<std::uint32_t>(kf);
        if (kf < 0.0 || (us < 0.013 && v > us))
            continue;
        const std::uint64_t k = static_cast<std::uint64_t>(kf);
        if (std::log(v) + std::log(inv_alpha_) - std::log(a_ / (us * us) + b_) <=
            kf * log_mean_ - mean_ - log_factorial(k)) {
            return static_cast<std::uint32_t>(k);
        }
    }
}

}
