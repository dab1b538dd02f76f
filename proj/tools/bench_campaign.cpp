// Times the parallel campaign kernel against the serial reference runner on
// a synthetic scenario and checks that every figure they report is bitwise
// identical. Usage: bench_campaign [n_tail] [grid_edge]

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "rarecell/campaign.hpp"
#include "rarecell/format.hpp"
#include "rarecell/scenario.hpp"

namespace rc = rarecell;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool same_result(const rc::campaign_result& a, const rc::campaign_result& b) {
    return a.mean.mean == b.mean.mean && a.mean.std_err == b.mean.std_err &&
           a.b == b.b && a.tail.hits == b.tail.hits && a.tail.p_hat == b.tail.p_hat;
}

void report(const std::string& label, double sec, std::int64_t reps) {
    std::cout << label << ": " << reps << " replicates in "
              << rc::format_double(sec) << " s ("
              << rc::format_double(reps / sec / 1000.0) << " k rep/s)\n";
}

} // namespace

int main(int argc, char** argv) {
    const std::int64_t n_tail = argc > 1 ? std::atoll(argv[1]) : 20000;
    const int edge = argc > 2 ? std::atoi(argv[2]) : 64;

    const rc::scenario scn = rc::generate_synthetic(edge, edge, 1.0, 1.0, 2.0, {});
    rc::campaign_config cfg;
    cfg.lambda = 0.5;
    cfg.tau_db = -30.0;
    cfg.eps = 0.05;
    cfg.n_mean = 2000;
    cfg.n_tail = n_tail;
    cfg.master_seed = 20260813;

    std::cout << "scenario: synthetic " << edge << " x " << edge
              << ", lambda = " << rc::format_double(cfg.lambda)
              << ", tau = " << rc::format_double(cfg.tau_db) << " dB\n";

    auto t0 = std::chrono::steady_clock::now();
    const rc::campaign_result ref = rc::run_campaign_reference(scn, cfg);
    report("reference (serial, public ops)", seconds_since(t0), cfg.n_mean + cfg.n_tail);

    int max_threads = 1;
#ifdef _OPENMP
    max_threads = omp_get_max_threads();
#endif
    std::vector<int> thread_counts{1};
    for (int t : {2, 4, 8}) {
        if (t <= max_threads)
            thread_counts.push_back(t);
    }
    if (thread_counts.back() != max_threads)
        thread_counts.push_back(max_threads);

    bool all_match = true;
    for (int t : thread_counts) {
        cfg.threads = t;
        t0 = std::chrono::steady_clock::now();
        const rc::campaign_result res = rc::run_campaign(scn, cfg);
        report("kernel, " + std::to_string(t) + " thread(s)", seconds_since(t0),
               cfg.n_mean + cfg.n_tail);
        if (!same_result(ref, res)) {
            std::cout << "MISMATCH against reference at " << t << " thread(s)\n";
            all_match = false;
        }
    }

    if (!all_match)
        return 1;
    std::cout << "identity: mean, std_err, b, hits, p_hat bitwise equal across all runs\n";
    std::cout << "mean L = " << rc::format_double(ref.mean.mean) << ", b = "
              << rc::format_double(ref.b) << ", hits = " << ref.tail.hits << " of "
              << ref.tail.n << "\n";
    return 0;
}
