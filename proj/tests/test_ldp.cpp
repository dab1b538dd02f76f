#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "rarecell/errors.hpp"
#include "rarecell/ldp.hpp"
#include "support/oracles.hpp"

using namespace rarecell;
namespace ts = testsupport;

namespace {

std::vector<sweep_point> points_on_line(double p1, double p2,
                                        const std::vector<double>& xs) {
    std::vector<sweep_point> pts;
    for (double x : xs) {
        sweep_point p;
        p.x = x;
        p.p_hat = std::exp(p1 * x + p2);
        p.std_err = 0.1 * p.p_hat;
        p.n = 1000;
        pts.push_back(p);
    }
    return pts;
}

grid_geometry geom_2x2() { return grid_geometry{2, 2, 1.0, 1.0, 0.0, 0.0}; }

} // namespace

TEST_CASE("an exact exponential decay is recovered to machine precision") {
    const double p1 = -0.7, p2 = 0.3;
    const auto pts = points_on_line(p1, p2, {0.5, 1.0, 2.0, 3.5, 5.0});
    for (bool weighted : {false, true}) {
        int excluded = -1;
        const auto fit = fit_rate_linear(pts, weighted, &excluded);
        CHECK(excluded == 0);
        CHECK(fit.points_used == 5);
        CHECK(fit.p1 == doctest::Approx(p1).epsilon(1e-10));
        CHECK(fit.p2 == doctest::Approx(p2).epsilon(1e-10));
        CHECK(fit.rate_estimate == doctest::Approx(-p1).epsilon(1e-10));
        CHECK(fit.residual_norm < 1e-10);
    }
}

TEST_CASE("the unweighted fit matches an independent least squares") {
    std::vector<sweep_point> pts;
    const std::vector<double> xs = {1, 2, 3, 4, 6};
    const std::vector<double> ps = {0.31, 0.11, 0.035, 0.016, 0.0021};
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sweep_point p;
        p.x = xs[i];
        p.p_hat = ps[i];
        p.std_err = 0.05 * ps[i];
        pts.push_back(p);
    }
    std::vector<double> ys;
    for (double p : ps) ys.push_back(std::log(p));
    const auto oracle = ts::ols_fit(xs, ys);
    const auto fit = fit_rate_linear(pts);
    CHECK(fit.p1 == doctest::Approx(oracle.slope).epsilon(1e-12));
    CHECK(fit.p2 == doctest::Approx(oracle.intercept).epsilon(1e-12));
    double ss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - (oracle.slope * xs[i] + oracle.intercept);
        ss += r * r;
    }
    CHECK(fit.residual_norm == doctest::Approx(std::sqrt(ss)).epsilon(1e-12));
}

TEST_CASE("variance weighting suppresses points with huge relative error") {
    auto pts = points_on_line(-1.0, 0.0, {1.0, 2.0, 3.0});
    sweep_point outlier;
    outlier.x = 4.0;
    outlier.p_hat = std::exp(3.0); // far off the line
    outlier.std_err = outlier.p_hat * 1e9;
    pts.push_back(outlier);

    const auto plain = fit_rate_linear(pts, false);
    const auto weighted = fit_rate_linear(pts, true);
    CHECK(std::abs(plain.p1 - (-1.0)) > 0.5); // the outlier drags the slope
    CHECK(weighted.p1 == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(weighted.p2 == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("zero-hit points are excluded rather than imputed") {
    auto pts = points_on_line(-0.5, 0.1, {1.0, 2.0, 3.0});
    sweep_point zero;
    zero.x = 9.0;
    zero.p_hat = 0.0;
    pts.push_back(zero);

    int excluded = 0;
    const auto fit = fit_rate_linear(pts, false, &excluded);
    CHECK(excluded == 1);
    CHECK(fit.points_used == 3);
    CHECK(fit.p1 == doctest::Approx(-0.5).epsilon(1e-10));
}

TEST_CASE("fewer than two usable points cannot define a slope") {
    std::vector<sweep_point> pts(3);
    pts[0].x = 1.0;
    pts[1].x = 2.0;
    pts[2].x = 3.0;
    pts[0].p_hat = 0.5; // the other two have zero hits
    CHECK_THROWS_AS(fit_rate_linear(pts), numerical_error);
    pts[1].p_hat = 0.25;
    CHECK_NOTHROW(fit_rate_linear(pts));
}

TEST_CASE("coincident abscissae are rejected") {
    auto pts = points_on_line(-1.0, 0.0, {2.0, 2.0});
    CHECK_THROWS_AS(fit_rate_linear(pts), numerical_error);
}

TEST_CASE("rate curve applies the advertised transforms") {
    const auto pts = points_on_line(-0.8, 0.4, {1.0, 2.0, 4.0});
    const auto fit = fit_rate_linear(pts);
    const auto curve = rate_curve(pts, fit);
    REQUIRE(curve.size() == pts.size());
    for (std::size_t i = 0; i < curve.size(); ++i) {
        CHECK(curve[i].x == pts[i].x);
        CHECK(curve[i].empirical ==
              doctest::Approx(-std::log(pts[i].p_hat) / pts[i].x).epsilon(1e-12));
        CHECK(curve[i].fitted ==
              doctest::Approx(-fit.p1 - fit.p2 / pts[i].x).epsilon(1e-12));
    }

    auto with_zero = pts;
    sweep_point zero;
    zero.x = 8.0;
    with_zero.push_back(zero);
    CHECK(rate_curve(with_zero, fit).size() == pts.size());
}

TEST_CASE("closed-form rate functions") {
    CHECK(gaussian_rate(1.5, 1.0, 2.0) == doctest::Approx(0.03125).epsilon(1e-15));
    CHECK(gaussian_rate(1.0, 1.0, 0.5) == 0.0);
    CHECK_THROWS_AS(gaussian_rate(1.0, 0.0, 0.0), std::domain_error);
    CHECK_THROWS_AS(gaussian_rate(1.0, 0.0, -1.0), std::domain_error);

    CHECK(exponential_rate(1.0, 1.0) == 0.0);
    CHECK(exponential_rate(1.5, 1.0) ==
          doctest::Approx(0.5 - std::log(1.5)).epsilon(1e-15));
    CHECK(exponential_rate(3.0, 2.0) ==
          doctest::Approx(0.5 - std::log(1.5)).epsilon(1e-15)); // scale invariant
    CHECK_THROWS_AS(exponential_rate(0.0, 1.0), std::domain_error);
    CHECK_THROWS_AS(exponential_rate(1.0, 0.0), std::domain_error);
}

TEST_CASE("measures validate their weights") {
    const auto geom = geom_2x2();
    const auto m = measure_from_weights(geom, {1.0, 2.0, 3.0, 4.0});
    CHECK(m.total_mass == 10.0);
    CHECK_THROWS_AS(measure_from_weights(geom, {1.0, 2.0, 3.0}), std::invalid_argument);
    CHECK_THROWS_AS(measure_from_weights(geom, {1.0, -2.0, 3.0, 4.0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        measure_from_weights(geom, {1.0, std::numeric_limits<double>::quiet_NaN(), 3.0, 4.0}),
        std::invalid_argument);
    CHECK_THROWS_AS(measure_from_weights(grid_geometry{}, {}), std::invalid_argument);
}

TEST_CASE("relative entropy of a measure against itself is exactly zero") {
    const auto mu = measure_from_weights(geom_2x2(), {0.5, 1.25, 2.0, 0.25});
    CHECK(relative_entropy(mu, mu) == 0.0);
}

TEST_CASE("doubling a measure costs total_mass * (2 log 2 - 1)") {
    const auto geom = geom_2x2();
    const std::vector<double> base = {0.5, 1.25, 2.0, 0.25};
    std::vector<double> doubled;
    for (double w : base) doubled.push_back(2.0 * w);
    const auto mu = measure_from_weights(geom, base);
    const auto nu = measure_from_weights(geom, doubled);
    const double expected = mu.total_mass * (2.0 * std::log(2.0) - 1.0);
    CHECK(relative_entropy(nu, mu) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("mass outside the support costs infinity") {
    const auto geom = geom_2x2();
    const auto mu = measure_from_weights(geom, {1.0, 1.0, 0.0, 1.0});
    const auto nu = measure_from_weights(geom, {1.0, 1.0, 0.5, 1.0});
    CHECK(relative_entropy(nu, mu) == std::numeric_limits<double>::infinity());
    CHECK(std::isfinite(relative_entropy(mu, nu)));
}

TEST_CASE("vanishing tiles contribute the reference mass") {
    const auto geom = geom_2x2();
    const auto mu = measure_from_weights(geom, {0.5, 1.0, 1.0, 1.0});
    const auto nu = measure_from_weights(geom, {0.0, 1.0, 1.0, 1.0});
    CHECK(relative_entropy(nu, mu) == 0.5);
}

TEST_CASE("equal total masses reduce to plain kullback-leibler") {
    const auto geom = geom_2x2();
    const std::vector<double> p = {0.1, 0.2, 0.3, 0.4};
    const std::vector<double> q = {0.25, 0.25, 0.25, 0.25};
    const auto nu = measure_from_weights(geom, p);
    const auto mu = measure_from_weights(geom, q);
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) kl += p[i] * std::log(p[i] / q[i]);
    CHECK(relative_entropy(nu, mu) == doctest::Approx(kl).epsilon(1e-12));
}

TEST_CASE("mismatched geometries are rejected") {
    const auto mu = measure_from_weights(geom_2x2(), {1.0, 1.0, 1.0, 1.0});
    const auto nu =
        measure_from_weights(grid_geometry{4, 1, 1.0, 1.0, 0.0, 0.0}, {1.0, 1.0, 1.0, 1.0});
    CHECK_THROWS_AS(relative_entropy(nu, mu), std::invalid_argument);
}

TEST_CASE("iid mean tails match closed-form probabilities") {
    dist_spec expd;
    expd.kind = dist_spec::family::exponential;
    expd.m = 1.0;

    // n = 1: P(X >= s) = e^-s
    auto est = iid_mean_tail(expd, 1, 1.0, 200000, 42);
    double p = std::exp(-1.0);
    CHECK(std::abs(est.p_hat - p) < 5.0 * std::sqrt(p * (1.0 - p) / est.reps));

    // sum of n exponentials is gamma(n, m)
    est = iid_mean_tail(expd, 25, 1.5, 300000, 43);
    p = ts::exp_sum_tail(25, 1.0, 1.5 * 25);
    CHECK(std::abs(est.p_hat - p) < 5.0 * std::sqrt(p * (1.0 - p) / est.reps));

    dist_spec gauss;
    gauss.kind = dist_spec::family::gaussian;
    gauss.m = 0.0;
    gauss.sigma = 1.0;

    // the mean of n standard normals is N(0, 1/n)
    est = iid_mean_tail(gauss, 4, 0.0, 200000, 44);
    CHECK(std::abs(est.p_hat - 0.5) < 5.0 * std::sqrt(0.25 / est.reps));

    est = iid_mean_tail(gauss, 1, 1.0, 200000, 45);
    p = ts::normal_tail(1.0);
    CHECK(std::abs(est.p_hat - p) < 5.0 * std::sqrt(p * (1.0 - p) / est.reps));

    est = iid_mean_tail(gauss, 16, 0.5, 200000, 46);
    p = ts::normal_tail(2.0);
    CHECK(std::abs(est.p_hat - p) < 5.0 * std::sqrt(p * (1.0 - p) / est.reps));
}

TEST_CASE("iid tail estimates are reproducible across thread counts") {
    dist_spec expd;
    expd.kind = dist_spec::family::exponential;
    expd.m = 2.0;
    const auto a = iid_mean_tail(expd, 10, 3.0, 50000, 7, 1);
    const auto b = iid_mean_tail(expd, 10, 3.0, 50000, 7, 4);
    const auto c = iid_mean_tail(expd, 10, 3.0, 50000, 7, 8);
    CHECK(a.hits == b.hits);
    CHECK(a.hits == c.hits);
    CHECK(a.p_hat == b.p_hat);
}

TEST_CASE("iid tail validation") {
    dist_spec expd;
    expd.kind = dist_spec::family::exponential;
    CHECK_THROWS_AS(iid_mean_tail(expd, 0, 1.0, 100, 1), std::invalid_argument);
    CHECK_THROWS_AS(iid_mean_tail(expd, 1, 1.0, 0, 1), std::invalid_argument);
    expd.m = 0.0;
    CHECK_THROWS_AS(iid_mean_tail(expd, 1, 1.0, 100, 1), std::invalid_argument);
    dist_spec gauss;
    gauss.kind = dist_spec::family::gaussian;
    gauss.sigma = 0.0;
    CHECK_THROWS_AS(iid_mean_tail(gauss, 1, 1.0, 100, 1), std::invalid_argument);
}
