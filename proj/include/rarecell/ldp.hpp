#pragma once

#include <cstdint>
#include <vector>

#include "rarecell/rng.hpp"
#include "rarecell/scenario.hpp"

namespace rarecell {

struct sweep_point {
    double x = 0.0;      // the abscissa: user density, or n in oracle runs
    double p_hat = 0.0;
    double std_err = 0.0;
    std::int64_t n = 0;  // replicates behind p_hat
};

struct rate_fit {
    double p1 = 0.0;            // slope of log p_hat against x
    double p2 = 0.0;            // intercept
    double residual_norm = 0.0; // L2 norm of fit residuals
    int points_used = 0;
    double rate_estimate = 0.0; // -p1
};

// Ordinary least squares of log p_hat against x. Points with p_hat <= 0
// carry no log value and are excluded (imputing them would bias the slope
// exactly where the event is rarest); excluded_points reports how many.
// Fewer than 2 usable points is a numerical_error. The variance-weighted
// variant weights each point by (p_hat/std_err)^2.
rate_fit fit_rate_linear(const std::vector<sweep_point>& points,
                         bool variance_weighted = false,
                         int* excluded_points = nullptr);

struct rate_curve_point {
    double x = 0.0;
    double empirical = 0.0; // -log(p_hat)/x
    double fitted = 0.0;    // -p1 - p2/x
};

// Per-point empirical rate alongside the curve induced by the linear fit.
std::vector<rate_curve_point> rate_curve(const std::vector<sweep_point>& points,
                                         const rate_fit& fit);

// Closed-form rate functions used as oracles.
double gaussian_rate(double s, double m, double sigma);
double exponential_rate(double s, double m);

// Nonnegative tile weights aligned with a grid geometry.
struct discrete_measure {
    grid_geometry geom;
    std::vector<double> weights;
    double total_mass = 0.0;
};

discrete_measure measure_from_weights(const grid_geometry& geom, std::vector<double> weights);

// Unnormalized relative entropy sum_t [nu log(nu/mu) - nu + mu] with
// 0 log 0 = 0; +infinity when nu puts mass where mu has none. The
// unnormalized extension reduces to plain Kullback-Leibler when the total
// masses coincide.
double relative_entropy(const discrete_measure& nu, const discrete_measure& mu);

struct dist_spec {
    enum class family { exponential, gaussian };
    family kind = family::exponential;
    double m = 1.0;     // mean
    double sigma = 1.0; // gaussian only
};

struct iid_tail_estimate {
    double p_hat = 0.0;
    double std_err = 0.0;
    std::int64_t hits = 0;
    std::int64_t reps = 0;
};

// Monte Carlo estimate of P(mean of n iid draws >= s). Each replicate uses
// its own derived stream, so the estimate is reproducible for any thread
// count.
iid_tail_estimate iid_mean_tail(const dist_spec& dist, std::int64_t n, double s,
                                std::int64_t reps, std::uint64_t master_seed,
                                int threads = 0);

}
