#pragma once

#include <cstdint>

#include "rarecell/rng.hpp"

namespace rarecell {

// log(k!) via a cached table for small k and a Stirling series beyond it.
double log_factorial(std::uint64_t k);

// Poisson sampler with constants precomputed for one fixed mean, since a
// campaign draws millions of counts at the same per-tile mean. Multiplicative
// inversion below the cutoff, PTRS transformed rejection at or above it; the
// standard library sampler is implementation-defined and would break
// cross-run reproducibility.
class poisson_gen {
public:
    static constexpr double inversion_cutoff = 10.0;

    explicit poisson_gen(double mean);

    double mean() const { return mean_; }

    std::uint32_t operator()(xoshiro256pp& gen) const;

private:
    double mean_ = 0.0;
    // inversion path
    double exp_neg_mean_ = 1.0;
    // PTRS path
    double b_ = 0.0;
    double a_ = 0.0;
    double inv_alpha_ = 0.0;
    double v_r_ = 0.0;
    double log_mean_ = 0.0;
};

// One-off convenience wrapper.
inline std::uint32_t sample_poisson(xoshiro256pp& gen, double mean) {
    return poisson_gen(mean)(gen);
}

}
