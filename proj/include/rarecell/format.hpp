#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace rarecell {

// Shortest decimal form that round-trips to the same double. All numeric
// text output (CSV, .asc grids, manifests) goes through this so repeated
// runs are byte-identical.
std::string format_double(double v);

std::string format_int(std::int64_t v);
std::string format_uint(std::uint64_t v);

// Locale-independent double parser over a whole token; returns false if the
// token is not a plain finite number.
bool parse_double(std::string_view token, double& out);

// Integer parser with the same contract.
bool parse_int(std::string_view token, std::int64_t& out);

}
