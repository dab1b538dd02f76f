#include "rarecell/ldp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "rarecell/errors.hpp"

namespace rarecell {

rate_fit fit_rate_linear(const std::vector<sweep_point>& points, bool variance_weighted,
                         int* excluded_points) {
    std::vector<double> x, y, w;
    int excluded = 0;
    for (const auto& p : points) {
        if (!(p.p_hat > 0.0)) {
            ++excluded;
            continue;
        }
        x.push_back(p.x);
        y.push_back(std::log(p.p_hat));
        if (variance_weighted) {
            // var(log p_hat) is approximately (std_err/p_hat)^2
            const double rel = p.std_err / p.p_hat;
            w.push_back(rel > 0.0 ? 1.0 / (rel * rel) : 1.0);
        } else {
            w.push_back(1.0);
        }
    }
    if (excluded_points)
        *excluded_points = excluded;
    if (x.size() < 2)
        throw numerical_error("fit_rate_linear: need at least 2 points with nonzero hits, have " +
                              std::to_string(x.size()));

    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sw += w[i];
        sx += w[i] * x[i];
        sy += w[i] * y[i];
        sxx += w[i] * x[i] * x[i];
        sxy += w[i] * x[i] * y[i];
    }
    const double det = sw * sxx - sx * sx;
    if (!(std::abs(det) > 0.0))
        throw numerical_error("fit_rate_linear: degenerate abscissae, slope is undetermined");

    rate_fit fit;
    fit.p1 = (sw * sxy - sx * sy) / det;
    fit.p2 = (sxx * sy - sx * sxy) / det;
    fit.points_used = static_cast<int>(x.size());
    fit.rate_estimate = -fit.p1;
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (fit.p1 * x[i] + fit.p2);
        ss += r * r;
    }
    fit.residual_norm = std::sqrt(ss);
    return fit;
}

std::vector<rate_curve_point> rate_curve(const std::vector<sweep_point>& points,
                                         const rate_fit& fit) {
    std::vector<rate_curve_point> curve;
    for (const auto& p : points) {
        if (!(p.p_hat > 0.0) || !(p.x > 0.0))
            continue;
        rate_curve_point c;
        c.x = p.x;
        c.empirical = -std::log(p.p_hat) / p.x;
        c.fitted = -fit.p1 - fit.p2 / p.x;
        curve.push_back(c);
    }
    return curve;
}

double gaussian_rate(double s, double m, double sigma) {
    if (!(sigma > 0.0))
        throw std::domain_error("gaussian_rate: sigma must be positive");
    const double d = s - m;
    return d * d / (2.0 * sigma * sigma);
}

double exponential_rate(double s, double m) {
    if (!(s > 0.0) || !(m > 0.0))
        throw std::domain_error("exponential_rate: s and m must be positive");
    const double r = s / m;
    return r - 1.0 - std::log(r);
}

discrete_measure measure_from_weights(const grid_geometry& geom, std::vector<double> weights) {
    if (!geom.valid() || static_cast<std::int64_t>(weights.size()) != geom.tiles())
        throw std::invalid_argument("measure_from_weights: weights do not match geometry");
    discrete_measure m;
    m.geom = geom;
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w))
            throw std::invalid_argument("measure_from_weights: weights must be finite and nonnegative");
        total += w;
    }
    m.weights = std::move(weights);
    m.total_mass = total;
    return m;
}

double relative_entropy(const discrete_measure& nu, const discrete_measure& mu) {
    if (nu.geom != mu.geom)
        throw std::invalid_argument("relative_entropy: geometries differ");
    double h = 0.0;
    for (std::size_t t = 0; t < nu.weights.size(); ++t) {
        const double a = nu.weights[t];
        const double b = mu.weights[t];
        if (a < 0.0 || b < 0.0)
            throw std::invalid_argument("relative_entropy: negative weight");
        if (a == 0.0) {
            h += b; // nu log(nu/mu) -> 0
        } else if (b == 0.0) {
            return std::numeric_limits<double>::infinity();
        } else {
            h += a * std::log(a / b) - a + b;
        }
    }
    return h;
}

iid_tail_estimate iid_mean_tail(const dist_spec& dist, std::int64_t n, double s,
                                std::int64_t reps, std::uint64_t master_seed, int threads) {
    if (n < 1 || reps < 1)
        throw std::invalid_argument("iid_mean_tail: n and reps must be at least 1");
    if (!(dist.m > 0.0) && dist.kind == dist_spec::family::exponential)
        throw std::invalid_argument("iid_mean_tail: exponential mean must be positive");
    if (dist.kind == dist_spec::family::gaussian && !(dist.sigma > 0.0))
        throw std::invalid_argument("iid_mean_tail: gaussian sigma must be positive");

    const bool exponential = dist.kind == dist_spec::family::exponential;
    const double threshold = s * static_cast<double>(n); // compare sums, not means
    std::int64_t hits = 0;

#ifdef _OPENMP
    const int n_threads = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 4096) num_threads(n_threads) reduction(+ : hits)
#endif
    for (std::int64_t r = 0; r < reps; ++r) {
        xoshiro256pp stream = derive_stream(
            seed_spec{master_seed, static_cast<std::uint64_t>(r)}, stream_domain::variates);
        double sum = 0.0;
        if (exponential) {
            for (std::int64_t i = 0; i < n; ++i)
                sum += draw_unit_exponential(stream);
            sum *= dist.m;
        } else {
            for (std::int64_t i = 0; i < n; ++i)
                sum += draw_unit_normal(stream);
            sum = dist.sigma * sum + dist.m * static_cast<double>(n);
        }
        if (sum >= threshold)
            ++hits;
    }

    iid_tail_estimate est;
    est.hits = hits;
    est.reps = reps;
    est.p_hat = static_cast<double>(hits) / static_cast<double>(reps);
    est.std_err = std::sqrt(est.p_hat * (1.0 - est.p_hat) / static_cast<double>(reps));
    return est;
}

}
