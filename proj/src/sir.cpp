#include "rarecell/sir.hpp"

#include <stdexcept>

#include "rarecell/pathloss.hpp"

namespace rarecell {

threshold_spec threshold_lambda(double tau_db, double lambda) {
    if (!(lambda > 0.0))
        throw std::domain_error("threshold_lambda: lambda must be positive");
    threshold_spec thr;
    thr.tau_db = tau_db;
    thr.lambda = lambda;
    thr.tau_lambda_db = tau_db - 10.0 * std::log10(lambda);
    thr.tau_lambda_linear = db_to_linear(tau_db) / lambda;
    return thr;
}

namespace {

void check_geometry(const user_sample& sample, const scenario& scn, const char* op) {
    if (sample.counts.size() != static_cast<std::size_t>(scn.geom.tiles()))
        throw std::invalid_argument(std::string(op) + ": sample does not match scenario geometry");
}

} // namespace

double total_received(const user_sample& sample, const scenario& scn) {
    check_geometry(sample, scn, "total_received");
    double sum = 0.0;
    const auto n = sample.counts.size();
    for (std::size_t t = 0; t < n; ++t) {
        if (sample.counts[t] != 0)
            sum += sample.counts[t] * scn.loss_linear[t];
    }
    return sum;
}

std::int64_t disconnected_count(const user_sample& sample, const scenario& scn,
                                const threshold_spec& thr) {
    check_geometry(sample, scn, "disconnected_count");
    const double bound = thr.tau_lambda_linear * total_received(sample, scn);
    std::int64_t disconnected = 0;
    const auto n = sample.counts.size();
    for (std::size_t t = 0; t < n; ++t) {
        if (sample.counts[t] != 0 && scn.loss_linear[t] < bound)
            disconnected += sample.counts[t];
    }
    return disconnected;
}

cell_outcome evaluate_outcome(const user_sample& sample, const scenario& scn,
                              const threshold_spec& thr) {
    if (!(thr.lambda > 0.0))
        throw std::domain_error("evaluate_outcome: lambda must be positive");
    check_geometry(sample, scn, "evaluate_outcome");

    cell_outcome outcome;
    outcome.replicate_index = sample.replicate_index;
    outcome.total_users = sample.total_users;
    outcome.total_received = total_received(sample, scn);

    const double bound = thr.tau_lambda_linear * outcome.total_received;
    std::int64_t disconnected = 0;
    const auto n = sample.counts.size();
    for (std::size_t t = 0; t < n; ++t) {
        if (sample.counts[t] != 0 && scn.loss_linear[t] < bound)
            disconnected += sample.counts[t];
    }
    outcome.disconnected_users = disconnected;
    outcome.l_value = disconnected / thr.lambda;
    outcome.connected_fraction =
        outcome.total_users > 0
            ? 1.0 - static_cast<double>(disconnected) / static_cast<double>(outcome.total_users)
            : 1.0;
    return outcome;
}

double limit_l_value(const scenario& scn, double tau_linear) {
    if (!(tau_linear > 0.0))
        throw std::domain_error("limit_l_value: tau must be positive");
    double weighted_loss = 0.0;
    const auto n = scn.intensity.mass.size();
    for (std::size_t t = 0; t < n; ++t)
        weighted_loss += scn.intensity.mass[t] * scn.loss_linear[t];
    const double bound = tau_linear * weighted_loss;
    double mass = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        if (scn.intensity.mass[t] > 0.0 && scn.loss_linear[t] < bound)
            mass += scn.intensity.mass[t];
    }
    return mass;
}

}
