#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rarecell/sir.hpp"

namespace rarecell {

struct campaign_config {
    double lambda = 0.0;
    double tau_db = 0.0;
    double eps = 0.0;               // relative deviation defining b
    std::int64_t n_mean = 10000;    // replicates for the mean phase
    std::int64_t n_tail = 0;        // replicates for the tail phase
    std::uint64_t master_seed = 0;
    int threads = 0;                // 0 = library default
};

// round(1000 * e^lambda): a practical replicate-count default that grows
// with density.
std::int64_t run_count_heuristic(double lambda);

// b = mean * (1 + eps).
double pick_b(double mean, double eps);

struct mean_estimate {
    double mean = 0.0;
    double std_err = 0.0;
    std::int64_t n = 0;
};

struct tail_estimate {
    double b = 0.0;
    double p_hat = 0.0;
    double std_err = 0.0; // sqrt(p_hat (1 - p_hat) / n)
    std::int64_t hits = 0;
    std::int64_t n = 0;
    bool observed = false; // false when hits == 0: tail not observed
    // 95% Wilson interval; more honest than the normal interval when hits
    // are scarce, which is the normal state of affairs in rare-event runs.
    double wilson_low = 0.0;
    double wilson_high = 0.0;
};

// Conditional accumulation over atypical replicates (l_value > b). Sums are
// kept as integers so merges are exact in any order.
struct heatmap_accumulator {
    grid_geometry geom;
    std::vector<std::int64_t> sum_counts;
    std::int64_t n_atypical = 0;
    std::int64_t sum_users_atypical = 0;

    bool empty() const { return n_atypical == 0; }
    // mean_counts = sum/n_atypical; fails on an empty accumulator rather
    // than dividing by zero.
    std::vector<double> mean_counts() const;
    // mean_counts[t] / (lambda * mass[t]) on free tiles, NaN on blocked.
    std::vector<double> ratio(const scenario& scn, double lambda) const;
};

struct extreme_sample {
    double connected_fraction = 1.0;
    std::uint64_t replicate_index = 0;
    std::int64_t total_users = 0;
    std::int64_t disconnected_users = 0;
    std::uint64_t digest = 0; // FNV-1a of the count array
};

struct extreme_record {
    extreme_sample least; // smallest connected fraction
    extreme_sample most;  // largest connected fraction
};

struct campaign_request {
    bool want_tail = true;
    bool want_heatmap = false;
    bool want_extremes = false;
};

struct campaign_result {
    mean_estimate mean;
    double b = 0.0;
    tail_estimate tail;
    std::optional<heatmap_accumulator> heatmap;
    std::optional<extreme_record> extremes;
};

// Mean phase only: replicate indices [0, n_mean).
mean_estimate estimate_mean(const scenario& scn, const campaign_config& cfg);

// Tail phase only: replicate indices [n_mean, n_mean + n_tail), so the two
// phases never share randomness and b stays independent of the tail sample.
tail_estimate estimate_tail(const scenario& scn, const campaign_config& cfg, double b);

heatmap_accumulator conditional_heatmap(const scenario& scn, const campaign_config& cfg,
                                        double b);

// Scans the tail-phase replicates for the least and most connected
// configurations; ties resolve to the lower replicate index.
extreme_record track_extremes(const scenario& scn, const campaign_config& cfg);

// Full pipeline in one pass: mean phase, b, then one tail phase feeding the
// tail estimate and any requested accumulators. Results are bit-identical
// for any thread count.
campaign_result run_campaign(const scenario& scn, const campaign_config& cfg,
                             const campaign_request& req = {});

// Single-threaded reference runner built from the public per-replicate
// operations; the parallel kernel is tested against it.
campaign_result run_campaign_reference(const scenario& scn, const campaign_config& cfg,
                                       const campaign_request& req = {});

}
