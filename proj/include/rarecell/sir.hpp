#pragma once

#include <cstdint>

#include "rarecell/sampler.hpp"
#include "rarecell/scenario.hpp"

namespace rarecell {

// Density-rescaled disconnection threshold. tau_db is the density-free
// threshold; the per-density test uses tau_lambda = tau/lambda.
struct threshold_spec {
    double tau_db = 0.0;
    double lambda = 0.0;
    double tau_lambda_db = 0.0;
    double tau_lambda_linear = 0.0;
};

// tau_lambda_db = tau_db - 10*log10(lambda); lambda must be positive.
threshold_spec threshold_lambda(double tau_db, double lambda);

// Per-replicate summary of the disconnection functional.
struct cell_outcome {
    std::int64_t total_users = 0;
    std::int64_t disconnected_users = 0;
    double l_value = 0.0;            // disconnected_users / lambda, an area
    double connected_fraction = 1.0; // 1 when there are no users
    double total_received = 0.0;     // linear power sum over all users
    std::uint64_t replicate_index = 0;
};

// Sum of counts[t] * loss_linear[t] over all tiles: the denominator of the
// signal-to-total-interference ratio, including each user's own signal.
double total_received(const user_sample& sample, const scenario& scn);

// A user is disconnected when its tile's loss is strictly below
// tau_lambda_linear * total_received; ties connect. All users of a tile share
// one loss value, so the test is per tile, all or nothing.
std::int64_t disconnected_count(const user_sample& sample, const scenario& scn,
                                const threshold_spec& thr);

cell_outcome evaluate_outcome(const user_sample& sample, const scenario& scn,
                              const threshold_spec& thr);

// Deterministic high-density limit of the disconnection functional: the
// intensity mass of tiles whose loss falls below tau_linear times the
// intensity-weighted loss total. Used as a law-of-large-numbers oracle.
double limit_l_value(const scenario& scn, double tau_linear);

}
