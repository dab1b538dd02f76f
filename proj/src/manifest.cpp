#include "rarecell/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>

#include "rarecell/errors.hpp"
#include "rarecell/format.hpp"

namespace rarecell {

void run_manifest::set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : entries_) {
        if (k == key) {
            v = value;
            return;
        }
    }
    entries_.emplace_back(key, value);
}

void run_manifest::set(const std::string& key, double value) {
    set(key, format_double(value));
}

void run_manifest::set_int(const std::string& key, std::int64_t value) {
    set(key, format_int(value));
}

void run_manifest::set_uint(const std::string& key, std::uint64_t value) {
    set(key, format_uint(value));
}

std::string run_manifest::to_text() const {
    std::string out;
    for (const auto& [k, v] : entries_) {
        out += k;
        out += '=';
        out += v;
        out += '\n';
    }
    return out;
}

void run_manifest::write_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw data_error("cannot open '" + path + "' for writing");
    out << to_text();
    if (!out)
        throw data_error("write failed for '" + path + "'");
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[80];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
    return buf;
}

std::uint64_t fnv1a64(const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < size; ++i) {
        hash ^= bytes[i];
        hash *= 0x100000001b3ull;
    }
    return hash;
}

std::uint64_t fnv1a64_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw data_error("cannot open '" + path + "' for digest");
    std::uint64_t hash = 0xcbf29ce484222325ull;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            hash ^= static_cast<unsigned char>(buf[i]);
            hash *= 0x100000001b3ull;
        }
    }
    return hash;
}

}
