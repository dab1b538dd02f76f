#pragma once

#include <cstdint>
#include <vector>

#include "rarecell/rng.hpp"
#include "rarecell/scenario.hpp"

namespace rarecell {

// One realization of the user process as per-tile counts.
struct user_sample {
    std::vector<std::uint32_t> counts; // row-major, zero on blocked tiles
    std::int64_t total_users = 0;
    double lambda = 0.0;
    std::uint64_t replicate_index = 0;
};

// Independent Poisson(lambda * mass[t]) count per tile, drawn in fixed
// row-major order from the replicate's counts stream; zero-mass tiles consume
// no randomness. A sample is a pure function of (scenario, lambda, seed).
user_sample sample_counts(const scenario& scn, double lambda, seed_spec seed);

struct point_xy {
    double x = 0, y = 0;
};

// Uniform position inside each user's tile, for scatter-plot exports only;
// SIR math never looks at coordinates. Pure function of (sample, seed).
std::vector<point_xy> jitter_points(const scenario& scn, const user_sample& sample,
                                    seed_spec seed);

// FNV-1a over the count array; identifies a sample in reports and manifests.
std::uint64_t sample_digest(const user_sample& sample);

}
