#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tunekit/backend.h"
#include "tunekit/capture.h"
#include "tunekit/space.h"

namespace tunekit {

struct Budget {
    std::optional<std::size_t> max_evaluations;
    std::optional<double> max_wall_seconds = 900.0;

    // Throws Error unless at least one bound is set and bounds are non-negative.
    void validate() const;
};

enum struct Strategy { exhaustive, random, surrogate };

const char* strategy_name(Strategy s);
Strategy parse_strategy(std::string_view name);

struct Evaluation {
    Configuration config;
    Measurement measurement;
    // Seconds since the session started, at completion of this evaluation.
    double offset = 0.0;
};

struct BestConfig {
    Configuration config;
    double objective = 0.0;

    friend bool operator==(const BestConfig&, const BestConfig&) = default;
};

enum struct SessionStatus { ok, no_best };

const char* session_status_name(SessionStatus s);

struct TuningSession {
    // Path of the replayed capture, as given.
    std::string capture;
    std::string kernel_name;
    std::string kernel_key;
    DeviceIdent device;
    ProblemSize problem;
    std::string precision;
    Strategy strategy = Strategy::random;
    std::uint64_t seed = 0;
    Budget budget;
    std::string created;
    nlohmann::json executor;
    nlohmann::json definition;
    std::vector<Evaluation> evaluations;
    std::optional<BestConfig> best;

    SessionStatus status() const {
        return best ? SessionStatus::ok : SessionStatus::no_best;
    }

    // Most recent evaluation of `config`, if any.
    const Evaluation* find(const Configuration& config) const;
};

struct TuneOptions {
    // Recorded in the session and passed to the executor.
    std::string capture_path;
    // Random evaluations before the surrogate model takes over.
    std::size_t bootstrap = 20;
};

/**
 * Replays `capture` under configurations chosen by `strategy` until the
 * budget or the space runs out. Failed measurements are recorded and count
 * against max_evaluations. With a simulated executor the session clock is
 * the simulated time, so the result depends only on the inputs.
 */
TuningSession tune(
    const Capture& capture,
    const ConfigSpace& space,
    Strategy strategy,
    const Budget& budget,
    Executor& executor,
    std::uint64_t seed,
    const TuneOptions& options = {});

struct SurrogateParams {
    std::size_t pool_size = 100;
    std::size_t neighbors = 5;
    double beta = 1.0;
    double epsilon = 1e-9;
};

/**
 * Picks the next configuration from a pool of random valid unevaluated
 * points by minimizing `prediction - beta * d_min * sigma`, where the
 * prediction is a distance-weighted nearest-neighbour average of the
 * successful evaluations. Returns nullopt when every valid point has been
 * evaluated.
 */
std::optional<Configuration> surrogate_propose(
    std::span<const Evaluation> history,
    const ConfigSpace& space,
    std::uint64_t seed,
    const SurrogateParams& params = {});

struct Observation {
    std::vector<double> x;
    // Absent for failed evaluations; those only count towards d_min.
    std::optional<double> objective;
};

// Index of the winning pool entry. Ties on the acquisition value go to the
// larger d_min, then to the earlier entry.
std::size_t select_from_pool(
    std::span<const std::vector<double>> pool,
    std::span<const Observation> observations,
    const SurrogateParams& params = {});

// JSON lines: a header object (`"type":"session"`), then one object per
// evaluation (`"type":"evaluation"`).
std::string session_to_jsonl(const TuningSession& session);
TuningSession session_from_jsonl(std::string_view text);

void save_session(const TuningSession& session, const std::filesystem::path& path);
TuningSession load_session(const std::filesystem::path& path);

inline constexpr const char* session_extension = ".klsession";

}  // namespace tunekit
