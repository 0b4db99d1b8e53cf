#pragma once

#include <atomic>
#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tunekit/backend.h"
#include "tunekit/capture.h"
#include "tunekit/wisdom.h"

namespace tunekit {

struct LaunchReport {
    std::string kernel_name;
    std::string device_name;
    ProblemSize problem;
    Configuration config;
    MatchKind match_kind = MatchKind::default_config;
    LaunchGeometry geometry;
    // Wall-clock seconds per stage. Cache hits only have `launch`.
    std::map<std::string, double> stage_timings;
    bool cache_hit = false;
    // The selected configuration failed to compile and the default was used.
    bool retried_default = false;
    // Why the selected configuration was abandoned, or why wisdom was ignored.
    std::string note;
    Measurement measurement;
};

nlohmann::json to_json(const LaunchReport& r);

// Compilation failed even after falling back to the default configuration.
struct DispatchError: Error {
    DispatchError(const std::string& message, Configuration config, std::string diagnostics) :
        Error(message),
        config(std::move(config)),
        diagnostics(std::move(diagnostics)) {}

    Configuration config;
    std::string diagnostics;
};

struct StageMeans {
    std::size_t launches = 0;
    // Mean seconds per stage over the launches, for stages that occurred.
    std::map<std::string, double> means;

    double total() const;
    // Fraction of total() spent in `stage`; 0 when total() is 0.
    double share(const std::string& stage) const;
};

struct OverheadReport {
    StageMeans first;
    StageMeans subsequent;
};

nlohmann::json to_json(const OverheadReport& r);

struct DispatchOptions {
    // Defaults to $KERNEL_LAUNCHER_WISDOM, else the working directory.
    std::optional<std::filesystem::path> wisdom_dir;
    // Defaults to the capture environment variables.
    std::optional<CapturePolicy> capture;
    // Each launch report is appended here as a JSON line.
    std::optional<std::filesystem::path> log_path;
    std::string application;
};

/**
 * A kernel that picks its configuration from wisdom on first launch for a
 * device and problem size, compiles it once, and reuses the compiled
 * instance afterwards. Concurrent first launches for the same key share
 * a single selection and compilation.
 */
class WisdomKernel {
  public:
    WisdomKernel(KernelDefinition definition, Compiler& compiler, Executor& executor, DispatchOptions options = {});

    const KernelDefinition& definition() const {
        return definition_;
    }

    const std::filesystem::path& wisdom_dir() const {
        return wisdom_dir_;
    }

    LaunchReport launch(const DeviceIdent& device, const LaunchArgs& args);

    // Launches on the executor's device.
    LaunchReport launch(const LaunchArgs& args) {
        return launch(executor_.device(), args);
    }

    std::size_t cache_size() const;
    std::uint64_t selections() const {
        return selections_.load();
    }

    std::vector<LaunchReport> reports() const;

    // Throws Error if nothing was launched yet.
    OverheadReport overhead_report() const;

  private:
    struct Entry {
        ExecutableHandle handle;
        Configuration config;
        MatchKind match_kind = MatchKind::default_config;
        bool retried_default = false;
        std::string note;
        std::map<std::string, double> timings;
    };

    using Key = std::pair<std::string, ProblemSize>;

    std::shared_ptr<const Entry> prepare(const DeviceIdent& device, const ProblemSize& problem);
    void maybe_capture(const ProblemSize& problem, const LaunchArgs& args);
    void record(const LaunchReport& report);

    KernelDefinition definition_;
    Compiler& compiler_;
    Executor& executor_;
    std::filesystem::path wisdom_dir_;
    CapturePolicy capture_;
    std::optional<std::filesystem::path> log_path_;
    std::string application_;

    mutable std::mutex mutex_;
    std::map<Key, std::shared_future<std::shared_ptr<const Entry>>> cache_;
    std::set<ProblemSize> captured_;
    std::vector<LaunchReport> reports_;
    std::atomic<std::uint64_t> selections_ {0};
};

}  // namespace tunekit
