#include "rarecell/sampler.hpp"

#include <stdexcept>

#include "rarecell/manifest.hpp"
#include "rarecell/poisson.hpp"

namespace rarecell {

user_sample sample_counts(const scenario& scn, double lambda, seed_spec seed) {
    if (lambda < 0.0)
        throw std::domain_error("sample_counts: lambda must be nonnegative");

    user_sample sample;
    sample.lambda = lambda;
    sample.replicate_index = seed.replicate_index;
    sample.counts.assign(scn.intensity.mass.size(), 0);
    if (lambda == 0.0)
        return sample;

    // Every free tile carries the same mass (the tile area), so one
    // generator serves the whole grid.
    const poisson_gen gen(lambda * scn.geom.tile_area());
    xoshiro256pp stream = derive_stream(seed, stream_domain::counts);
    std::int64_t total = 0;
    const auto n = scn.intensity.mass.size();
    for (std::size_t t = 0; t < n; ++t) {
        if (scn.intensity.mass[t] <= 0.0)
            continue; // blocked tiles consume no randomness
        const std::uint32_t k = gen(stream);
        sample.counts[t] = k;
        total += k;
    }
    sample.total_users = total;
    return sample;
}

std::vector<point_xy> jitter_points(const scenario& scn, const user_sample& sample,
                                    seed_spec seed) {
    if (sample.counts.size() != static_cast<std::size_t>(scn.geom.tiles()))
        throw std::invalid_argument("jitter_points: sample does not match scenario geometry");

    std::vector<point_xy> points;
    points.reserve(static_cast<std::size_t>(sample.total_users));
    xoshiro256pp stream = derive_stream(seed, stream_domain::jitter);
    const auto& geom = scn.geom;
    for (int row = 0; row < geom.n_rows; ++row) {
        for (int col = 0; col < geom.n_cols; ++col) {
            const std::uint32_t k = sample.counts[geom.index(col, row)];
            for (std::uint32_t i = 0; i < k; ++i) {
                point_xy p;
                p.x = geom.x0 + (col + stream.unit()) * geom.dx;
                p.y = geom.y0 + (geom.n_rows - row - 1 + stream.unit()) * geom.dy;
                points.push_back(p);
            }
        }
    }
    return points;
}

std::uint64_t sample_digest(const user_sample& sample) {
    return fnv1a64(sample.counts.data(),
                   sample.counts.size() * sizeof(std::uint32_t));
}

}
