#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace mixpro {

inline constexpr const char* kEngineVersion = "0.1.0";

// Reproducibility record written next to every command's outputs. Two runs
// with equal manifests must produce byte-identical output files.
struct RunManifest {
    std::string command;
    std::string engine_version = kEngineVersion;
    std::uint64_t config_hash = 0;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> input_paths;
    std::string out_dir;
    // Command-specific fields, merged into the top-level object.
    nlohmann::json extra = nlohmann::json::object();

    nlohmann::json to_json() const;
    void write(const std::string& path) const;
};

// Writes through a temporary sibling and renames, so readers never observe a
// partially written file.
void atomic_write_file(const std::string& path, const std::string& content);

std::string hex64(std::uint64_t value);

}  // namespace mixpro
