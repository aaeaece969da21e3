#include "mixpro/manifest.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace mixpro {

nlohmann::json RunManifest::to_json() const {
    nlohmann::json j;
    j["command"] = command;
    j["engine_version"] = engine_version;
    j["config_hash"] = hex64(config_hash);
    j["seeds"] = seeds;
    j["input_paths"] = input_paths;
    j["out_dir"] = out_dir;
    for (const auto& item : extra.items()) j[item.key()] = item.value();
    return j;
}

void RunManifest::write(const std::string& path) const {
    atomic_write_file(path, to_json().dump(2) + "\n");
}

void atomic_write_file(const std::string& path, const std::string& content) {
    std::filesystem::path target(path);
    std::filesystem::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("atomic_write_file: cannot open " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("atomic_write_file: write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, target);
}

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

}  // namespace mixpro
