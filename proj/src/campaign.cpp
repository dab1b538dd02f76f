#include "rarecell/campaign.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "rarecell/errors.hpp"
#include "rarecell/poisson.hpp"

namespace rarecell {

std::int64_t run_count_heuristic(double lambda) {
    if (lambda < 0.0)
        throw std::domain_error("run_count_heuristic: lambda must be nonnegative");
    const double n = 1000.0 * std::exp(lambda);
    if (!(n < 9.0e18))
        throw std::overflow_error("run_count_heuristic: replicate count overflows");
    return std::llround(n);
}

double pick_b(double mean, double eps) {
    if (mean < 0.0)
        throw std::domain_error("pick_b: mean must be nonnegative");
    if (!(eps > 0.0))
        throw std::domain_error("pick_b: eps must be positive");
    return mean * (1.0 + eps);
}

namespace {

constexpr std::int64_t chunk_size = 256;

int resolve_threads(int requested) {
#ifdef _OPENMP
    return requested > 0 ? requested : omp_get_max_threads();
#else
    (void)requested;
    return 1;
#endif
}

// Compacted free-tile view of a scenario: campaigns only ever touch free
// tiles, and a dense array keeps the replicate loop cache-friendly.
struct compact_scenario {
    std::vector<std::int64_t> tile_of; // free slot -> grid tile index
    std::vector<double> loss;          // linear loss per free slot
    double tile_mean_at(double lambda, const scenario& scn) const {
        return lambda * scn.geom.tile_area();
    }

    explicit compact_scenario(const scenario& scn) {
        const auto n = scn.intensity.mass.size();
        tile_of.reserve(n);
        loss.reserve(n);
        for (std::size_t t = 0; t < n; ++t) {
            if (scn.intensity.mass[t] > 0.0) {
                tile_of.push_back(static_cast<std::int64_t>(t));
                loss.push_back(scn.loss_linear[t]);
            }
        }
    }
};

struct replicate_stats {
    double l_value = 0.0;
    double fraction = 1.0;
    std::int64_t users = 0;
};

// Draws and scores one replicate. Counts land in `counts` (caller-owned
// scratch) so a hit can be folded into an accumulator without re-sampling.
replicate_stats eval_replicate(const compact_scenario& cs, const poisson_gen& gen,
                               double lambda, double tau_lambda_linear,
                               std::uint64_t master_seed, std::uint64_t replicate,
                               std::vector<std::uint32_t>& counts) {
    xoshiro256pp stream =
        derive_stream(seed_spec{master_seed, replicate}, stream_domain::counts);
    const std::size_t n = cs.loss.size();
    std::int64_t users = 0;
    double received = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t k = gen(stream);
        counts[i] = k;
        if (k != 0) {
            users += k;
            received += k * cs.loss[i];
        }
    }
    const double bound = tau_lambda_linear * received;
    std::int64_t disconnected = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (counts[i] != 0 && cs.loss[i] < bound)
            disconnected += counts[i];
    }
    replicate_stats st;
    st.users = users;
    st.l_value = disconnected / lambda;
    st.fraction = users > 0
                      ? 1.0 - static_cast<double>(disconnected) / static_cast<double>(users)
                      : 1.0;
    return st;
}

struct extreme_candidate {
    double fraction = 0.0;
    std::uint64_t replicate = 0;
    bool valid = false;
};

bool better_least(const extreme_candidate& a, const extreme_candidate& b) {
    if (!b.valid) return a.valid;
    if (!a.valid) return false;
    return a.fraction < b.fraction ||
           (a.fraction == b.fraction && a.replicate < b.replicate);
}

bool better_most(const extreme_candidate& a, const extreme_candidate& b) {
    if (!b.valid) return a.valid;
    if (!a.valid) return false;
    return a.fraction > b.fraction ||
           (a.fraction == b.fraction && a.replicate < b.replicate);
}

struct phase_accumulators {
    // per-chunk slots, folded serially in chunk order after the parallel loop
    std::vector<double> sum_l;
    std::vector<double> sum_l2;
    std::vector<std::int64_t> hits;
    std::vector<std::int64_t> users_atypical;
    std::vector<extreme_candidate> least;
    std::vector<extreme_candidate> most;
    // thread-merged (integer, order-independent)
    std::vector<std::int64_t> heat;
};

// One replicate range [first, first + n). The heavy lifting for every public
// campaign operation; all accumulation is either integer (order-free) or
// folded in fixed chunk order, so results are bit-identical for any thread
// count and schedule.
phase_accumulators run_phase(const scenario& scn, const compact_scenario& cs,
                             double lambda, double tau_lambda_linear, double b,
                             std::uint64_t first, std::int64_t n,
                             std::uint64_t master_seed, int threads,
                             bool want_heat, bool want_extremes) {
    const std::int64_t n_chunks = (n + chunk_size - 1) / chunk_size;
    phase_accumulators acc;
    acc.sum_l.assign(n_chunks, 0.0);
    acc.sum_l2.assign(n_chunks, 0.0);
    acc.hits.assign(n_chunks, 0);
    acc.users_atypical.assign(n_chunks, 0);
    if (want_extremes) {
        acc.least.assign(n_chunks, {});
        acc.most.assign(n_chunks, {});
    }
    if (want_heat)
        acc.heat.assign(cs.loss.size(), 0);

    const poisson_gen gen(cs.tile_mean_at(lambda, scn));
    const int n_threads = resolve_threads(threads);
    (void)n_threads;

#ifdef _OPENMP
#pragma omp parallel num_threads(n_threads)
#endif
    {
        std::vector<std::uint32_t> counts(cs.loss.size());
        std::vector<std::int64_t> heat_local;
        if (want_heat)
            heat_local.assign(cs.loss.size(), 0);

#ifdef _OPENMP
#pragma omp for schedule(dynamic)
#endif
        for (std::int64_t chunk = 0; chunk < n_chunks; ++chunk) {
            const std::int64_t lo = chunk * chunk_size;
            const std::int64_t hi = std::min(lo + chunk_size, n);
            double s1 = 0.0, s2 = 0.0;
            std::int64_t chunk_hits = 0, chunk_users = 0;
            extreme_candidate least, most;
            for (std::int64_t r = lo; r < hi; ++r) {
                const std::uint64_t replicate = first + static_cast<std::uint64_t>(r);
                const replicate_stats st = eval_replicate(cs, gen, lambda, tau_lambda_linear,
                                                          master_seed, replicate, counts);
                s1 += st.l_value;
                s2 += st.l_value * st.l_value;
                if (st.l_value > b) {
                    ++chunk_hits;
                    chunk_users += st.users;
                    if (want_heat) {
                        for (std::size_t i = 0; i < counts.size(); ++i)
                            heat_local[i] += counts[i];
                    }
                }
                if (want_extremes) {
                    const extreme_candidate cand{st.fraction, replicate, true};
                    if (better_least(cand, least)) least = cand;
                    if (better_most(cand, most)) most = cand;
                }
            }
            acc.sum_l[chunk] = s1;
            acc.sum_l2[chunk] = s2;
            acc.hits[chunk] = chunk_hits;
            acc.users_atypical[chunk] = chunk_users;
            if (want_extremes) {
                acc.least[chunk] = least;
                acc.most[chunk] = most;
            }
        }

        if (want_heat) {
#ifdef _OPENMP
#pragma omp critical(rarecell_heat_merge)
#endif
            {
                for (std::size_t i = 0; i < heat_local.size(); ++i)
                    acc.heat[i] += heat_local[i];
            }
        }
    }
    return acc;
}

mean_estimate fold_mean(const phase_accumulators& acc, std::int64_t n) {
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t c = 0; c < acc.sum_l.size(); ++c) {
        s1 += acc.sum_l[c];
        s2 += acc.sum_l2[c];
    }
    mean_estimate est;
    est.n = n;
    est.mean = s1 / n;
    if (n > 1) {
        const double var = std::max(0.0, (s2 - n * est.mean * est.mean) / (n - 1));
        est.std_err = std::sqrt(var / n);
    }
    return est;
}

tail_estimate fold_tail(const phase_accumulators& acc, double b, std::int64_t n) {
    std::int64_t hits = 0;
    for (auto h : acc.hits) hits += h;
    tail_estimate est;
    est.b = b;
    est.n = n;
    est.hits = hits;
    est.observed = hits > 0;
    est.p_hat = static_cast<double>(hits) / static_cast<double>(n);
    est.std_err = std::sqrt(est.p_hat * (1.0 - est.p_hat) / static_cast<double>(n));
    // 95% Wilson interval
    const double z = 1.959963984540054;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (est.p_hat + z2 / (2.0 * n)) / denom;
    const double half =
        z * std::sqrt(est.p_hat * (1.0 - est.p_hat) / n + z2 / (4.0 * n * n)) / denom;
    // boundary counts have exact interval ends; sqrt rounding would smudge them
    est.wilson_low = hits == 0 ? 0.0 : std::max(0.0, center - half);
    est.wilson_high = hits == n ? 1.0 : std::min(1.0, center + half);
    return est;
}

extreme_sample resolve_extreme(const scenario& scn, double lambda,
                               const threshold_spec& thr, std::uint64_t master_seed,
                               const extreme_candidate& cand) {
    const user_sample sample =
        sample_counts(scn, lambda, seed_spec{master_seed, cand.replicate});
    const cell_outcome outcome = evaluate_outcome(sample, scn, thr);
    extreme_sample ex;
    ex.connected_fraction = outcome.connected_fraction;
    ex.replicate_index = cand.replicate;
    ex.total_users = outcome.total_users;
    ex.disconnected_users = outcome.disconnected_users;
    ex.digest = sample_digest(sample);
    return ex;
}

void validate_common(const campaign_config& cfg) {
    if (!(cfg.lambda > 0.0))
        throw std::domain_error("campaign: lambda must be positive");
}

} // namespace

std::vector<double> heatmap_accumulator::mean_counts() const {
    if (empty())
        throw numerical_error("heatmap: no atypical replicates, nothing to average");
    std::vector<double> mean(sum_counts.size(), 0.0);
    for (std::size_t t = 0; t < sum_counts.size(); ++t)
        mean[t] = static_cast<double>(sum_counts[t]) / static_cast<double>(n_atypical);
    return mean;
}

std::vector<double> heatmap_accumulator::ratio(const scenario& scn, double lambda) const {
    const std::vector<double> mean = mean_counts();
    std::vector<double> out(mean.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t t = 0; t < mean.size(); ++t) {
        const double expected = lambda * scn.intensity.mass[t];
        if (expected > 0.0)
            out[t] = mean[t] / expected;
    }
    return out;
}

mean_estimate estimate_mean(const scenario& scn, const campaign_config& cfg) {
    validate_common(cfg);
    if (cfg.n_mean < 1)
        throw std::invalid_argument("estimate_mean: n_mean must be at least 1");
    const compact_scenario cs(scn);
    const threshold_spec thr = threshold_lambda(cfg.tau_db, cfg.lambda);
    const auto acc = run_phase(scn, cs, cfg.lambda, thr.tau_lambda_linear,
                               std::numeric_limits<double>::infinity(), 0, cfg.n_mean,
                               cfg.master_seed, cfg.threads, false, false);
    return fold_mean(acc, cfg.n_mean);
}

tail_estimate estimate_tail(const scenario& scn, const campaign_config& cfg, double b) {
    validate_common(cfg);
    if (cfg.n_tail < 1)
        throw std::invalid_argument("estimate_tail: n_tail must be at least 1");
    const compact_scenario cs(scn);
    const threshold_spec thr = threshold_lambda(cfg.tau_db, cfg.lambda);
    const auto acc = run_phase(scn, cs, cfg.lambda, thr.tau_lambda_linear, b,
                               static_cast<std::uint64_t>(cfg.n_mean), cfg.n_tail,
                               cfg.master_seed, cfg.threads, false, false);
    return fold_tail(acc, b, cfg.n_tail);
}

heatmap_accumulator conditional_heatmap(const scenario& scn, const campaign_config& cfg,
                                        double b) {
    validate_common(cfg);
    if (cfg.n_tail < 1)
        throw std::invalid_argument("conditional_heatmap: n_tail must be at least 1");
    const compact_scenario cs(scn);
    const threshold_spec thr = threshold_lambda(cfg.tau_db, cfg.lambda);
    const auto acc = run_phase(scn, cs, cfg.lambda, thr.tau_lambda_linear, b,
                               static_cast<std::uint64_t>(cfg.n_mean), cfg.n_tail,
                               cfg.master_seed, cfg.threads, true, false);

    heatmap_accumulator heat;
    heat.geom = scn.geom;
    heat.sum_counts.assign(scn.geom.tiles(), 0);
    for (std::size_t i = 0; i < cs.tile_of.size(); ++i)
        heat.sum_counts[cs.tile_of[i]] = acc.heat[i];
    for (auto h : acc.hits) heat.n_atypical += h;
    for (auto u : acc.users_atypical) heat.sum_users_atypical += u;
    return heat;
}

extreme_record track_extremes(const scenario& scn, const campaign_config& cfg) {
    validate_common(cfg);
    if (cfg.n_tail < 1)
        throw std::invalid_argument("track_extremes: n_tail must be at least 1");
    const compact_scenario cs(scn);
    const threshold_spec thr = threshold_lambda(cfg.tau_db, cfg.lambda);
    const auto acc = run_phase(scn, cs, cfg.lambda, thr.tau_lambda_linear,
                               std::numeric_limits<double>::infinity(),
                               static_cast<std::uint64_t>(cfg.n_mean), cfg.n_tail,
                               cfg.master_seed, cfg.threads, false, true);

    extreme_candidate least, most;
    for (std::size_t c = 0; c < acc.least.size(); ++c) {
        if (better_least(acc.least[c], least)) least = acc.least[c];
        if (better_most(acc.most[c], most)) most = acc.most[c];
    }
    extreme_record record;
    record.least = resolve_extreme(scn, cfg.lambda, thr, cfg.master_seed, least);
    record.most = resolve_extreme(scn, cfg.lambda, thr, cfg.master_seed, most);
    return record;
}

campaign_result run_campaign(const scenario& scn, const campaign_config& cfg,
                             const campaign_request& req) {
    validate_common(cfg);
    if (cfg.n_mean < 1)
        throw std::invalid_argument("run_campaign: n_mean must be at least 1");
    if (cfg.n_tail < 1)
        throw std::invalid_argument("run_campaign: n_tail must be at least 1");
    if (!(cfg.eps > 0.0))
        throw std::invalid_argument("run_campaign: eps must be positive");

    const compact_scenario cs(scn);
    const threshold_spec thr = threshold_lambda(cfg.tau_db, cfg.lambda);

    campaign_result result;
    const auto mean_acc = run_phase(scn, cs, cfg.lambda, thr.tau_lambda_linear,
                                    std::numeric_limits<double>::infinity(), 0, cfg.n_mean,
                                    cfg.master_seed, cfg.threads, false, false);
    result.mean = fold_mean(mean_acc, cfg.n_mean);
    result.b = pick_b(result.mean.mean, cfg.eps);

    const auto tail_acc = run_phase(scn, cs, cfg.lambda, thr.tau_lambda_linear, result.b,
                                    static_cast<std::uint64_t>(cfg.n_mean), cfg.n_tail,
                                    cfg.master_seed, cfg.threads, req.want_heatmap,
                                    req.want_extremes);
    if (req.want_tail)
        result.tail = fold_tail(tail_acc, result.b, cfg.n_tail);
    if (req.want_heatmap) {
        heatmap_accumulator heat;
        heat.geom = scn.geom;
        heat.sum_counts.assign(scn.geom.tiles(), 0);
        for (std::size_t i = 0; i < cs.tile_of.size(); ++i)
            heat.sum_counts[cs.tile_of[i]] = tail_acc.heat[i];
        for (auto h : tail_acc.hits) heat.n_atypical += h;
        for (auto u : tail_acc.users_atypical) heat.sum_users_atypical += u;
        result.heatmap = std::move(heat);
    }
    if (req.want_extremes) {
        extreme_candidate least, most;
        for (std::size_t c = 0; c < tail_acc.least.size(); ++c) {
            if (better_least(tail_acc.least[c], least)) least = tail_acc.least[c];
            if (better_most(tail_acc.most[c], most)) most = tail_acc.most[c];
        }
        extreme_record record;
        record.least = resolve_extreme(scn, cfg.lambda, thr, cfg.master_seed, least);
        record.most = resolve_extreme(scn, cfg.lambda, thr, cfg.master_seed, most);
        result.extremes = record;
    }
    return result;
}

campaign_result run_campaign_reference(const scenario& scn, const campaign_config& cfg,
                                       const campaign_request& req) {
    validate_common(cfg);
    if (cfg.n_mean < 1 || cfg.n_tail < 1)
        throw std::invalid_argument("run_campaign_reference: phase sizes must be at least 1");
    if (!(cfg.eps > 0.0))
        throw std::invalid_argument("run_campaign_reference: eps must be positive");

    const threshold_spec thr = threshold_lambda(cfg.tau_db, cfg.lambda);

    campaign_result result;
    {
        // mean phase, accumulated in the same fixed chunk layout as the kernel
        const std::int64_t n_chunks = (cfg.n_mean + chunk_size - 1) / chunk_size;
        std::vector<double> s1(n_chunks, 0.0), s2(n_chunks, 0.0);
        for (std::int64_t r = 0; r < cfg.n_mean; ++r) {
            const user_sample sample =
                sample_counts(scn, cfg.lambda, seed_spec{cfg.master_seed,
                                                         static_cast<std::uint64_t>(r)});
            const cell_outcome outcome = evaluate_outcome(sample, scn, thr);
            s1[r / chunk_size] += outcome.l_value;
            s2[r / chunk_size] += outcome.l_value * outcome.l_value;
        }
        double t1 = 0.0, t2 = 0.0;
        for (std::int64_t c = 0; c < n_chunks; ++c) {
            t1 += s1[c];
            t2 += s2[c];
        }
        result.mean.n = cfg.n_mean;
        result.mean.mean = t1 / cfg.n_mean;
        if (cfg.n_mean > 1) {
            const double var = std::max(
                0.0, (t2 - cfg.n_mean * result.mean.mean * result.mean.mean) / (cfg.n_mean - 1));
            result.mean.std_err = std::sqrt(var / cfg.n_mean);
        }
    }
    result.b = pick_b(result.mean.mean, cfg.eps);

    std::int64_t hits = 0;
    heatmap_accumulator heat;
    heat.geom = scn.geom;
    heat.sum_counts.assign(scn.geom.tiles(), 0);
    extreme_candidate least, most;
    for (std::int64_t r = 0; r < cfg.n_tail; ++r) {
        const std::uint64_t replicate = static_cast<std::uint64_t>(cfg.n_mean + r);
        const user_sample sample =
            sample_counts(scn, cfg.lambda, seed_spec{cfg.master_seed, replicate});
        const cell_outcome outcome = evaluate_outcome(sample, scn, thr);
        if (outcome.l_value > result.b) {
            ++hits;
            heat.n_atypical += 1;
            heat.sum_users_atypical += outcome.total_users;
            for (std::size_t t = 0; t < sample.counts.size(); ++t)
                heat.sum_counts[t] += sample.counts[t];
        }
        const extreme_candidate cand{outcome.connected_fraction, replicate, true};
        if (better_least(cand, least)) least = cand;
        if (better_most(cand, most)) most = cand;
    }

    if (req.want_tail) {
        phase_accumulators acc;
        acc.hits.assign(1, hits);
        result.tail = fold_tail(acc, result.b, cfg.n_tail);
    }
    if (req.want_heatmap)
        result.heatmap = std::move(heat);
    if (req.want_extremes) {
        extreme_record record;
        record.least = resolve_extreme(scn, cfg.lambda, thr, cfg.master_seed, least);
        record.most = resolve_extreme(scn, cfg.lambda, thr, cfg.master_seed, most);
        result.extremes = record;
    }
    return result;
}

}
