#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tunekit/backend.h"
#include "tunekit/tuner.h"

namespace tunekit {

struct Provenance {
    std::string date;
    std::map<std::string, std::string> software;
    std::string hostname;
    std::map<std::string, std::string> gpu;

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct WisdomRecord {
    DeviceIdent device;
    ProblemSize problem;
    Configuration config;
    double objective_seconds = 0.0;
    Provenance provenance;

    friend bool operator==(const WisdomRecord&, const WisdomRecord&) = default;
};

nlohmann::json to_json(const WisdomRecord& r);
WisdomRecord record_from_json(const nlohmann::json& j);

/**
 * Best-known configurations of one kernel, one record per (device name,
 * problem size). Stored as JSON lines: a header object followed by one
 * object per record, all canonical, so that loading and saving an
 * unmodified file reproduces it byte for byte.
 */
class WisdomFile {
  public:
    explicit WisdomFile(std::string kernel_key);

    const std::string& kernel_key() const {
        return kernel_key_;
    }

    const std::vector<WisdomRecord>& records() const {
        return records_;
    }

    bool empty() const {
        return records_.empty();
    }

    // Adds `record`, or replaces the record for the same device name and
    // problem size if `record` is faster. Returns true if the file changed.
    bool merge(WisdomRecord record);

    std::string to_string() const;
    static WisdomFile parse(std::string_view text);

    static WisdomFile load(const std::filesystem::path& path);
    // An empty file for `kernel_key` if `path` does not exist.
    static WisdomFile load_or_empty(const std::filesystem::path& path, const std::string& kernel_key);
    void save(const std::filesystem::path& path) const;

    friend bool operator==(const WisdomFile&, const WisdomFile&) = default;

  private:
    std::string kernel_key_;
    std::vector<WisdomRecord> records_;
};

inline constexpr int wisdom_format_version = 1;
inline constexpr const char* wisdom_extension = ".wisdom";
inline constexpr const char* wisdom_env_var = "KERNEL_LAUNCHER_WISDOM";

// `<dir>/<kernel key>.wisdom`
std::filesystem::path wisdom_file_name(const std::filesystem::path& dir, const std::string& kernel_key);

// Record for the session's best configuration, stamped with the current
// date and host.
WisdomRecord record_from_session(const TuningSession& session);

// Merges the session's best into `file`. Throws Error if the session has
// no best or was tuned for a different kernel key.
WisdomFile append_result(WisdomFile file, const TuningSession& session);

enum struct MatchKind { exact, same_device_nearest, same_arch_nearest, any_nearest, default_config };

// `exact`, `same_device_nearest`, ..., `default`
const char* match_kind_name(MatchKind k);

struct Selection {
    Configuration config;
    MatchKind kind = MatchKind::default_config;
    // Index into the file's records; absent for the default.
    std::optional<std::size_t> record;
};

// Euclidean distance between extents; missing components count as 1.
double problem_distance(const ProblemSize& a, const ProblemSize& b);

/**
 * Picks a configuration in order of preference: a record for this device
 * and problem size; the nearest problem size on this device; on this
 * architecture; on any device; finally `fallback`. Among candidates,
 * records with the same number of dimensions come first, then smaller
 * distance, lower objective and earlier position.
 */
Selection select(
    const WisdomFile& file,
    const DeviceIdent& device,
    const ProblemSize& problem,
    const Configuration& fallback);

}  // namespace tunekit
