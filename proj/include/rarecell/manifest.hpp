#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace rarecell {

// Flat key=value record written alongside every output file, sufficient to
// reproduce that output bit-for-bit (command, parameters, seed, input
// digests). Keys keep insertion order so manifests diff cleanly; only the
// two timestamp values vary between identical runs.
class run_manifest {
public:
    void set(const std::string& key, const std::string& value);
    void set(const std::string& key, double value);
    void set_int(const std::string& key, std::int64_t value);
    void set_uint(const std::string& key, std::uint64_t value);

    const std::vector<std::pair<std::string, std::string>>& entries() const {
        return entries_;
    }

    std::string to_text() const;
    void write_file(const std::string& path) const;

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

// Current UTC time, ISO 8601.
std::string utc_timestamp();

std::uint64_t fnv1a64(const void* data, std::size_t size);
std::uint64_t fnv1a64_file(const std::string& path);

}
