#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"

namespace tunekit {

inline constexpr const char* software_version = "0.1.0";

// Canonical JSON text: sorted keys, no insignificant whitespace.
inline std::string canonical_json(const nlohmann::json& j) {
    return j.dump();
}

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// Current UTC time, e.g. `2024-05-01T12:00:00Z`.
std::string utc_timestamp();

std::string host_name();

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view data);

std::string hex64(std::uint64_t v);

}  // namespace tunekit
