#include "rarecell/format.hpp"

#include <charconv>
#include <cmath>
#include <system_error>

namespace rarecell {

std::string format_double(double v) {
    char buf[40];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

std::string format_int(std::int64_t v) {
    char buf[24];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

std::string format_uint(std::uint64_t v) {
    char buf[24];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

bool parse_double(std::string_view token, double& out) {
    if (token.empty())
        return false;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    // from_chars does not accept a leading '+'
    if (*first == '+') {
        ++first;
        if (first == last)
            return false;
    }
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last)
        return false;
    out = value;
    return true;
}

bool parse_int(std::string_view token, std::int64_t& out) {
    if (token.empty())
        return false;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    if (*first == '+') {
        ++first;
        if (first == last)
            return false;
    }
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last)
        return false;
    out = value;
    return true;
}

}
