#pragma once

#include <cmath>
#include <stdexcept>

namespace rarecell {

// Decibel convention: power ratio, linear = 10^(db/10). All SIR arithmetic
// happens in linear scale; dB appears only at I/O boundaries because sums of
// powers are meaningless in dB.

inline double db_to_linear(double v_db) {
    return std::pow(10.0, v_db / 10.0);
}

inline double linear_to_db(double p_linear) {
    if (!(p_linear > 0.0))
        throw std::domain_error("linear_to_db: value must be positive");
    return 10.0 * std::log10(p_linear);
}

// Isotropic power-law attenuation min{1, s^-alpha}. The clamp makes s = 0
// well defined, so the base-station tile never produces a singularity.
inline double analytic_pathloss(double s_meters, double alpha) {
    if (s_meters < 0.0)
        throw std::domain_error("analytic_pathloss: distance must be nonnegative");
    if (!(alpha > 0.0))
        throw std::domain_error("analytic_pathloss: exponent must be positive");
    if (s_meters <= 1.0)
        return 1.0;
    return std::pow(s_meters, -alpha);
}

}
