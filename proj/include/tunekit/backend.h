#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tunekit/capture.h"
#include "tunekit/error.h"
#include "tunekit/kerneldef.h"

namespace tunekit {

struct DeviceIdent {
    std::string name;
    std::string architecture;
    // Informational (cores, bandwidth, ...).
    std::map<std::string, std::string> attributes;

    // Throws Error if name or architecture is empty.
    void validate() const;

    friend bool operator==(const DeviceIdent&, const DeviceIdent&) = default;
};

nlohmann::json to_json(const DeviceIdent& d);
DeviceIdent device_from_json(const nlohmann::json& j);

enum struct MeasurementStatus { ok, compile_failed, launch_failed, invalid_config };

const char* status_name(MeasurementStatus s);
MeasurementStatus parse_status(std::string_view name);

// Stage names used in stage_timings.
namespace stage {
    inline constexpr const char* wisdom_read = "wisdom_read";
    inline constexpr const char* compile = "compile";
    inline constexpr const char* module_load = "module_load";
    inline constexpr const char* launch = "launch";
}  // namespace stage

struct Measurement {
    MeasurementStatus status = MeasurementStatus::ok;
    // Kernel time in seconds; present iff status is ok.
    std::optional<double> objective;
    std::map<std::string, double> stage_timings;
    // Benchmarking cost of producing this measurement, in seconds.
    double elapsed_seconds = 0.0;
    std::string diagnostics;

    bool ok() const {
        return status == MeasurementStatus::ok;
    }

    static Measurement success(double objective);
    static Measurement failure(MeasurementStatus status, std::string diagnostics = {});
};

struct ExecutableHandle {
    std::uint64_t id = 0;
    CompileRequest request;
    // Compiler output, when the compiler produces a file.
    std::filesystem::path artifact;
    std::string diagnostics;
};

struct CompileError: Error {
    CompileError(const std::string& message, std::string diagnostics) :
        Error(message),
        diagnostics(std::move(diagnostics)) {}

    std::string diagnostics;
};

class Compiler {
  public:
    virtual ~Compiler() = default;

    // Throws CompileError on failure.
    virtual ExecutableHandle compile(const CompileRequest& request, const DeviceIdent& device) = 0;
};

// Records requests without compiling anything.
class MockCompiler: public Compiler {
  public:
    MockCompiler() = default;

    // Time each compile blocks for, to model compilation latency.
    void set_delay(std::chrono::microseconds delay) {
        delay_ = delay;
    }

    // Requests matching the predicate fail with CompileError.
    void fail_when(std::function<bool(const CompileRequest&)> predicate) {
        fail_when_ = std::move(predicate);
    }

    ExecutableHandle compile(const CompileRequest& request, const DeviceIdent& device) override;

    std::uint64_t invocations() const {
        return invocations_.load();
    }

    std::vector<CompileRequest> requests() const;

  private:
    std::chrono::microseconds delay_ {0};
    std::function<bool(const CompileRequest&)> fail_when_;
    std::atomic<std::uint64_t> invocations_ {0};
    mutable std::mutex mutex_;
    std::vector<CompileRequest> requests_;
};

/**
 * Runs a user-supplied command to compile. The source is written to a
 * temporary file; placeholders in the command template are substituted
 * once, left to right:
 *
 *   {SOURCE}  path of the source file
 *   {OUTPUT}  path the compiler should write
 *   {FLAGS}   defines and flags, space separated
 *   {ENTRY}   entry name with template arguments
 *
 * A non-zero exit status raises CompileError with the command's output.
 */
class SubprocessCompiler: public Compiler {
  public:
    SubprocessCompiler(std::string command_template, std::filesystem::path work_dir);

    ExecutableHandle compile(const CompileRequest& request, const DeviceIdent& device) override;

    // The command that would be run for the given paths.
    std::string render_command(
        const CompileRequest& request,
        const std::string& source_path,
        const std::string& output_path) const;

  private:
    std::string template_;
    std::filesystem::path work_dir_;
    std::atomic<std::uint64_t> counter_ {0};
};

// Replaces each `{NAME}` occurrence using `values`, scanning once from left
// to right; substituted text is never rescanned.
std::string substitute_placeholders(
    const std::string& text,
    const std::map<std::string, std::string>& values);

enum struct Concurrency {
    // Any number of evaluations may run concurrently.
    reentrant,
    // One evaluation at a time.
    exclusive,
};

struct BenchmarkRequest {
    const KernelDefinition& definition;
    const Configuration& config;
    const ProblemSize& problem;
    // Captured launch being replayed; may be null for executors that do not
    // need argument data.
    const Capture* capture = nullptr;
    // File the capture was read from, if any.
    std::string capture_path = {};
};

/**
 * The only path through which tuning and dispatch reach hardware.
 */
class Executor {
  public:
    virtual ~Executor() = default;

    virtual DeviceIdent device() const = 0;
    virtual Concurrency concurrency() const = 0;

    // True when elapsed_seconds of measurements is simulated time; the tuner
    // then uses it as its clock.
    virtual bool simulated_clock() const {
        return false;
    }

    // Compiles (as needed), runs and times one configuration.
    virtual Measurement benchmark(const BenchmarkRequest& request) = 0;

    // Loads compiled code onto the device ahead of launching it.
    virtual void load(const ExecutableHandle& handle) {
        (void)handle;
    }

    virtual Measurement launch(
        const ExecutableHandle& handle,
        const LaunchGeometry& geometry,
        const LaunchArgs& args) = 0;

    // Description stored in session logs; enough to rebuild simulated
    // executors offline.
    virtual nlohmann::json describe() const = 0;
};

/**
 * Deterministic synthetic performance landscape over a space.
 *
 * A point is encoded by normalized indices x_k = i_k / (n_k - 1) and costs
 * 1 + (x - mu)^T A (x - mu). mu is uniform in [0,1]^d; A is symmetric with
 * diagonal in [0.5, 2] and off-diagonal entries in [-0.3, 0.3], shifted by
 * (|min eigenvalue| + 0.1) I to make it positive definite. Draw order from
 * SplitMix64(seed): mu, then the diagonal, then the upper triangle row by row.
 */
class SimCostModel {
  public:
    SimCostModel(
        std::shared_ptr<const ConfigSpace> space,
        std::uint64_t seed,
        double noise_sigma = 0.0,
        std::optional<Expr> failure_restriction = std::nullopt);

    const ConfigSpace& space() const {
        return *space_;
    }

    std::uint64_t seed() const {
        return seed_;
    }

    double noise_sigma() const {
        return noise_sigma_;
    }

    const std::optional<Expr>& failure_restriction() const {
        return failure_;
    }

    const std::vector<double>& mu() const {
        return mu_;
    }

    // Row-major d x d.
    const std::vector<double>& matrix() const {
        return a_;
    }

    // Noiseless cost of a point.
    double cost(std::span<const std::uint32_t> point) const;

    // Cost times (1 + N(0, sigma)); invalid_config for points matching the
    // failure restriction or violating the space's restrictions.
    Measurement measure(const Configuration& config) const;
    Measurement measure(std::span<const std::uint32_t> point) const;

  private:
    std::shared_ptr<const ConfigSpace> space_;
    std::uint64_t seed_;
    double noise_sigma_;
    std::optional<Expr> failure_;
    std::vector<double> mu_;
    std::vector<double> a_;
    mutable std::mutex noise_mutex_;
    mutable SplitMix64 noise_;
};

// Measures `config` under `model`.
Measurement sim_cost(const SimCostModel& model, const Configuration& config);

struct SimExecutorOptions {
    // Launches per benchmark; the median is reported.
    std::size_t repetitions = 7;
    // Simulated seconds per unit of model cost.
    double seconds_per_unit = 1e-3;
    // Simulated compile time charged to every benchmark.
    double compile_seconds = 1.0;
};

/**
 * Executor backed by a SimCostModel. Benchmarks and launches are
 * reentrant and report simulated time.
 */
class SimExecutor: public Executor {
  public:
    SimExecutor(DeviceIdent device, std::shared_ptr<const SimCostModel> model, SimExecutorOptions options = {});

    DeviceIdent device() const override {
        return device_;
    }

    Concurrency concurrency() const override {
        return Concurrency::reentrant;
    }

    bool simulated_clock() const override {
        return true;
    }

    const SimCostModel& model() const {
        return *model_;
    }

    const SimExecutorOptions& options() const {
        return options_;
    }

    Measurement benchmark(const BenchmarkRequest& request) override;
    Measurement launch(const ExecutableHandle& handle, const LaunchGeometry& geometry, const LaunchArgs& args)
        override;
    nlohmann::json describe() const override;

  private:
    Measurement run(const Configuration& config) const;

    DeviceIdent device_;
    std::shared_ptr<const SimCostModel> model_;
    SimExecutorOptions options_;
};

// Rebuilds a SimExecutor from SimExecutor::describe() output.
std::unique_ptr<SimExecutor> sim_executor_from_description(
    const nlohmann::json& description,
    std::shared_ptr<const ConfigSpace> space);

/**
 * Benchmarks by running an external command per configuration. The command
 * prints the kernel time in seconds as the last line of its output.
 * Placeholders: {CAPTURE} {ENTRY} {DEFINES} {FLAGS} {CONFIG} {BLOCK} {GRID}
 * {SHARED}. Exclusive: evaluations are serialized.
 */
class SubprocessExecutor: public Executor {
  public:
    SubprocessExecutor(DeviceIdent device, std::string benchmark_template, std::string launch_template = {});

    DeviceIdent device() const override {
        return device_;
    }

    Concurrency concurrency() const override {
        return Concurrency::exclusive;
    }

    Measurement benchmark(const BenchmarkRequest& request) override;
    Measurement launch(const ExecutableHandle& handle, const LaunchGeometry& geometry, const LaunchArgs& args)
        override;
    nlohmann::json describe() const override;

  private:
    Measurement run(const std::string& command);

    DeviceIdent device_;
    std::string benchmark_template_;
    std::string launch_template_;
    std::mutex mutex_;
};

struct CommandResult {
    int exit_code = 0;
    // stdout and stderr, interleaved.
    std::string output;
};

// Runs `command` through /bin/sh.
CommandResult run_command(const std::string& command);

}  // namespace tunekit
