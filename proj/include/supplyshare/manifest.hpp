#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace supplyshare {

inline constexpr const char* kVersion = "0.1.0";

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

/// ISO-8601 UTC time from SOURCE_DATE_EPOCH when set, else the wall clock.
std::string build_timestamp();

struct RunManifest {
    std::string command;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> inputs;   // file name -> digest
    std::vector<std::pair<std::string, std::string>> outputs;  // file name -> digest
    std::vector<std::pair<std::string, std::string>> versions;
    std::string created;

    /// Digests of `names` relative to `dir`.
    void add_outputs(const std::string& dir, const std::vector<std::string>& names);
    void add_input(const std::string& label, const std::string& path);
    std::string to_json() const;
};

/// Fills versions and the timestamp.
RunManifest new_manifest(const std::string& command, const std::string& config_text, std::uint64_t seed);

}  // namespace supplyshare
