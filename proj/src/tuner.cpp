#include "tunekit/tuner.h"

#include <chrono>
#include <cmath>
#include <limits>
#include <set>

#include "tunekit/fs.h"

namespace tunekit {

void Budget::validate() const {
    if (!max_evaluations && !max_wall_seconds) {
        throw Error("budget needs a maximum number of evaluations or a time limit");
    }
    if (max_wall_seconds && !(*max_wall_seconds >= 0)) {
        throw Error("time budget must be non-negative");
    }
}

const char* strategy_name(Strategy s) {
    switch (s) {
        case Strategy::exhaustive:
            return "exhaustive";
        case Strategy::random:
            return "random";
        case Strategy::surrogate:
            return "surrogate";
    }
    return "?";
}

Strategy parse_strategy(std::string_view name) {
    for (auto s : {Strategy::exhaustive, Strategy::random, Strategy::surrogate}) {
        if (name == strategy_name(s)) {
            return s;
        }
    }
    throw Error("unknown strategy '" + std::string(name) + "' (expected exhaustive, random or surrogate)");
}

const char* session_status_name(SessionStatus s) {
    return s == SessionStatus::ok ? "ok" : "no_best";
}

const Evaluation* TuningSession::find(const Configuration& config) const {
    for (auto it = evaluations.rbegin(); it != evaluations.rend(); ++it) {
        if (it->config == config) {
            return &*it;
        }
    }
    return nullptr;
}

namespace {

std::optional<PointIndex> draw_unevaluated(
    const ConfigSpace& space,
    RandomSampler& sampler,
    const std::set<PointIndex>& seen) {
    auto point = sampler.next_point_unless([&](const PointIndex& p) { return seen.count(p) > 0; });
    if (point) {
        return point;
    }

    // Nearly exhausted or heavily restricted: pick among what is left.
    std::vector<PointIndex> rest;
    Enumerator e = space.enumerate();
    while (const PointIndex* p = e.next_point()) {
        if (seen.count(*p) == 0) {
            rest.push_back(*p);
        }
    }
    if (rest.empty()) {
        return std::nullopt;
    }
    return rest[sampler.rng().below(rest.size())];
}

class SessionClock {
  public:
    explicit SessionClock(bool simulated) :
        simulated_(simulated),
        start_(std::chrono::steady_clock::now()) {}

    double now() const {
        if (simulated_) {
            return simulated_now_;
        }
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

    double finish(const Measurement& m) {
        if (simulated_) {
            simulated_now_ += m.elapsed_seconds;
        }
        double t = now();
        if (t <= last_) {
            t = std::nextafter(last_, std::numeric_limits<double>::infinity());
        }
        last_ = t;
        return t;
    }

  private:
    bool simulated_;
    std::chrono::steady_clock::time_point start_;
    double simulated_now_ = 0.0;
    double last_ = -1.0;
};

}  // namespace

TuningSession tune(
    const Capture& capture,
    const ConfigSpace& space,
    Strategy strategy,
    const Budget& budget,
    Executor& executor,
    std::uint64_t seed,
    const TuneOptions& options) {
    budget.validate();
    if (!(capture.definition.space() == space)) {
        throw Error("capture of " + capture.definition.name() + " was recorded for a different search space");
    }

    TuningSession session;
    session.capture = options.capture_path;
    session.kernel_name = capture.definition.name();
    session.kernel_key = capture.definition.kernel_key();
    session.device = executor.device();
    session.problem = capture.problem;
    session.precision = capture.precision();
    session.strategy = strategy;
    session.seed = seed;
    session.budget = budget;
    session.created = utc_timestamp();
    session.executor = executor.describe();
    session.definition = capture.definition.to_json();

    std::set<PointIndex> seen;
    RandomSampler sampler(space, seed);
    Enumerator enumerator = space.enumerate();
    SessionClock clock(executor.simulated_clock());

    while (true) {
        if (budget.max_evaluations && session.evaluations.size() >= *budget.max_evaluations) {
            break;
        }
        if (budget.max_wall_seconds && clock.now() >= *budget.max_wall_seconds) {
            break;
        }

        std::optional<PointIndex> point;
        if (strategy == Strategy::exhaustive) {
            if (const PointIndex* p = enumerator.next_point()) {
                point = *p;
            }
        } else if (strategy == Strategy::random || session.evaluations.size() < options.bootstrap) {
            point = draw_unevaluated(space, sampler, seen);
        } else {
            auto config = surrogate_propose(
                session.evaluations,
                space,
                mix_seed(seed, session.evaluations.size()));
            if (config) {
                point = space.point_of(*config);
            }
        }

        if (!point) {
            break;
        }
        seen.insert(*point);

        Configuration config = space.configuration_at(*point);
        BenchmarkRequest request {capture.definition, config, capture.problem, &capture, options.capture_path};

        Measurement m;
        try {
            m = executor.benchmark(request);
        } catch (const std::exception& e) {
            m = Measurement::failure(MeasurementStatus::launch_failed, e.what());
        }
        if (m.ok() && !(m.objective && *m.objective > 0 && std::isfinite(*m.objective))) {
            m.status = MeasurementStatus::launch_failed;
            m.objective.reset();
            m.diagnostics = "executor reported a non-positive time";
        }
        if (!m.ok()) {
            m.objective.reset();
        }

        double offset = clock.finish(m);
        if (m.ok() && (!session.best || *m.objective < session.best->objective)) {
            session.best = BestConfig {config, *m.objective};
        }
        session.evaluations.push_back({std::move(config), std::move(m), offset});
    }

    return session;
}

namespace {

nlohmann::json budget_to_json(const Budget& b) {
    nlohmann::json j;
    j["max_evaluations"] = b.max_evaluations ? nlohmann::json(*b.max_evaluations) : nlohmann::json(nullptr);
    j["max_wall_seconds"] = b.max_wall_seconds ? nlohmann::json(*b.max_wall_seconds) : nlohmann::json(nullptr);
    return j;
}

Budget budget_from_json(const nlohmann::json& j) {
    Budget b;
    const auto& e = j.at("max_evaluations");
    const auto& w = j.at("max_wall_seconds");
    b.max_evaluations = e.is_null() ? std::nullopt : std::optional(e.get<std::size_t>());
    b.max_wall_seconds = w.is_null() ? std::nullopt : std::optional(w.get<double>());
    return b;
}

}  // namespace

std::string session_to_jsonl(const TuningSession& s) {
    nlohmann::json best = nullptr;
    if (s.best) {
        best = {{"config", to_json(s.best->config)}, {"objective", s.best->objective}};
    }

    nlohmann::json header = {
        {"type", "session"},
        {"format_version", 1},
        {"capture", s.capture},
        {"kernel_name", s.kernel_name},
        {"kernel_key", s.kernel_key},
        {"device", to_json(s.device)},
        {"problem", to_json(s.problem)},
        {"precision", s.precision},
        {"strategy", strategy_name(s.strategy)},
        {"seed", s.seed},
        {"budget", budget_to_json(s.budget)},
        {"created", s.created},
        {"executor", s.executor},
        {"definition", s.definition},
        {"status", session_status_name(s.status())},
        {"best", best},
        {"evaluations", s.evaluations.size()},
    };

    std::string out = canonical_json(header) + "\n";
    for (std::size_t i = 0; i < s.evaluations.size(); i++) {
        const Evaluation& e = s.evaluations[i];
        nlohmann::json line = {
            {"type", "evaluation"},
            {"index", i},
            {"offset", e.offset},
            {"config", to_json(e.config)},
            {"status", status_name(e.measurement.status)},
            {"objective", e.measurement.objective ? nlohmann::json(*e.measurement.objective) : nlohmann::json()},
            {"elapsed", e.measurement.elapsed_seconds},
            {"stage_timings", e.measurement.stage_timings},
            {"diagnostics", e.measurement.diagnostics},
        };
        out += canonical_json(line) + "\n";
    }
    return out;
}

TuningSession session_from_jsonl(std::string_view text) {
    TuningSession s;
    std::size_t line_no = 0;
    std::size_t expected = 0;

    try {
        std::size_t pos = 0;
        while (pos < text.size()) {
            std::size_t end = text.find('\n', pos);
            if (end == std::string_view::npos) {
                end = text.size();
            }
            std::string_view line = text.substr(pos, end - pos);
            pos = end + 1;
            line_no++;
            if (line.empty()) {
                continue;
            }

            auto j = nlohmann::json::parse(line);
            std::string type = j.at("type").get<std::string>();

            if (line_no == 1) {
                if (type != "session") {
                    throw FormatError("first line is not a session header");
                }
                if (j.at("format_version").get<int>() != 1) {
                    throw FormatError("unsupported session format version");
                }
                s.capture = j.at("capture").get<std::string>();
                s.kernel_name = j.at("kernel_name").get<std::string>();
                s.kernel_key = j.at("kernel_key").get<std::string>();
                s.device = device_from_json(j.at("device"));
                s.problem = problem_from_json(j.at("problem"));
                s.precision = j.at("precision").get<std::string>();
                s.strategy = parse_strategy(j.at("strategy").get<std::string>());
                s.seed = j.at("seed").get<std::uint64_t>();
                s.budget = budget_from_json(j.at("budget"));
                s.created = j.at("created").get<std::string>();
                s.executor = j.at("executor");
                s.definition = j.at("definition");
                expected = j.at("evaluations").get<std::size_t>();
                if (!j.at("best").is_null()) {
                    s.best = BestConfig {
                        configuration_from_json(j["best"].at("config")),
                        j["best"].at("objective").get<double>()};
                }
                continue;
            }

            if (type != "evaluation") {
                throw FormatError("unexpected record type '" + type + "'");
            }
            if (j.at("index").get<std::size_t>() != s.evaluations.size()) {
                throw FormatError("evaluation index out of sequence");
            }

            Evaluation e;
            e.offset = j.at("offset").get<double>();
            e.config = configuration_from_json(j.at("config"));
            e.measurement.status = parse_status(j.at("status").get<std::string>());
            if (!j.at("objective").is_null()) {
                e.measurement.objective = j["objective"].get<double>();
            }
            e.measurement.elapsed_seconds = j.at("elapsed").get<double>();
            e.measurement.stage_timings = j.at("stage_timings").get<std::map<std::string, double>>();
            e.measurement.diagnostics = j.at("diagnostics").get<std::string>();
            s.evaluations.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("malformed session log at line " + std::to_string(line_no) + ": " + e.what());
    } catch (const FormatError& e) {
        throw FormatError("malformed session log at line " + std::to_string(line_no) + ": " + e.what());
    }

    if (line_no == 0) {
        throw FormatError("empty session log");
    }
    if (s.evaluations.size() != expected) {
        throw FormatError(
            "session log is truncated: header announces " + std::to_string(expected) + " evaluations, found "
            + std::to_string(s.evaluations.size()));
    }
    return s;
}

void save_session(const TuningSession& session, const std::filesystem::path& path) {
    write_file_atomic(path, session_to_jsonl(session));
}

TuningSession load_session(const std::filesystem::path& path) {
    return session_from_jsonl(read_file(path));
}

}  // namespace tunekit
