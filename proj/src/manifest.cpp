#include "supplyshare/manifest.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <iomanip>
#include <sstream>

#include <Eigen/Core>
#include <boost/version.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "supplyshare/csv.hpp"
#include "supplyshare/error.hpp"

namespace supplyshare {

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw IOError("SHA-256 computation failed");
    }
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    return out.str();
}

std::string sha256_file(const std::string& path) { return sha256_hex(csv::read_text_file(path)); }

std::string build_timestamp() {
    std::time_t t = std::time(nullptr);
    if (const char* env = std::getenv("SOURCE_DATE_EPOCH")) {
        char* end = nullptr;
        const long long v = std::strtoll(env, &end, 10);
        if (end != env && *end == '\0') t = static_cast<std::time_t>(v);
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

void RunManifest::add_outputs(const std::string& dir, const std::vector<std::string>& names) {
    for (const auto& n : names) outputs.emplace_back(n, sha256_file(dir + "/" + n));
}

void RunManifest::add_input(const std::string& label, const std::string& path) {
    inputs.emplace_back(label, sha256_file(path));
}

std::string RunManifest::to_json() const {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["config_sha256"] = config_hash;
    j["seed"] = seed;
    auto pairs = [](const std::vector<std::pair<std::string, std::string>>& v) {
        nlohmann::ordered_json o = nlohmann::ordered_json::object();
        for (const auto& [k, d] : v) o[k] = d;
        return o;
    };
    j["inputs"] = pairs(inputs);
    j["outputs"] = pairs(outputs);
    j["versions"] = pairs(versions);
    j["created"] = created;
    return j.dump(2) + "\n";
}

RunManifest new_manifest(const std::string& command, const std::string& config_text, std::uint64_t seed) {
    RunManifest m;
    m.command = command;
    m.config_hash = sha256_hex(config_text);
    m.seed = seed;
    m.versions = {{"supplyshare", kVersion},
                  {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                std::to_string(EIGEN_MINOR_VERSION)},
                  {"boost", BOOST_LIB_VERSION}};
    m.created = build_timestamp();
    return m;
}

}  // namespace supplyshare
