#include "tunekit/dispatch.h"

#include <chrono>
#include <cstdlib>
#include <fstream>

#include "tunekit/fs.h"

namespace tunekit {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::filesystem::path default_wisdom_dir() {
    const char* dir = std::getenv(wisdom_env_var);
    return dir != nullptr && *dir != '\0' ? std::filesystem::path(dir) : std::filesystem::path(".");
}

StageMeans mean_of(const std::vector<const LaunchReport*>& reports) {
    StageMeans m;
    m.launches = reports.size();
    for (const auto* r : reports) {
        for (const auto& [stage, t] : r->stage_timings) {
            m.means[stage] += t;
        }
    }
    for (auto& [stage, t] : m.means) {
        t /= static_cast<double>(m.launches);
    }
    return m;
}

nlohmann::json to_json(const StageMeans& m) {
    return {{"launches", m.launches}, {"means", m.means}, {"total", m.total()}};
}

}  // namespace

nlohmann::json to_json(const LaunchReport& r) {
    return {
        {"kernel", r.kernel_name},
        {"device", r.device_name},
        {"problem", to_json(r.problem)},
        {"config", to_json(r.config)},
        {"match_kind", match_kind_name(r.match_kind)},
        {"cache_hit", r.cache_hit},
        {"retried_default", r.retried_default},
        {"stage_timings", r.stage_timings},
        {"status", status_name(r.measurement.status)},
        {"note", r.note},
    };
}

double StageMeans::total() const {
    double sum = 0.0;
    for (const auto& [stage, t] : means) {
        sum += t;
    }
    return sum;
}

double StageMeans::share(const std::string& stage) const {
    double t = total();
    auto it = means.find(stage);
    return t > 0 && it != means.end() ? it->second / t : 0.0;
}

nlohmann::json to_json(const OverheadReport& r) {
    return {{"first", to_json(r.first)}, {"subsequent", to_json(r.subsequent)}};
}

WisdomKernel::WisdomKernel(KernelDefinition definition, Compiler& compiler, Executor& executor, DispatchOptions options) :
    definition_(std::move(definition)),
    compiler_(compiler),
    executor_(executor),
    wisdom_dir_(options.wisdom_dir ? *options.wisdom_dir : default_wisdom_dir()),
    capture_(options.capture ? *options.capture : CapturePolicy::from_env()),
    log_path_(std::move(options.log_path)),
    application_(std::move(options.application)) {}

std::shared_ptr<const WisdomKernel::Entry> WisdomKernel::prepare(const DeviceIdent& device, const ProblemSize& problem) {
    auto entry = std::make_shared<Entry>();
    Configuration fallback = definition_.space().default_config().config;

    auto start = Clock::now();
    Selection selection {fallback, MatchKind::default_config, std::nullopt};
    try {
        auto path = wisdom_file_name(wisdom_dir_, definition_.kernel_key());
        if (std::filesystem::exists(path) && std::filesystem::file_size(path) > 0) {
            WisdomFile file = WisdomFile::load(path);
            if (file.kernel_key() == definition_.kernel_key()) {
                selection = select(file, device, problem, fallback);
            }
        }
    } catch (const Error& e) {
        entry->note = std::string("wisdom ignored: ") + e.what();
    }
    selections_++;
    entry->timings[stage::wisdom_read] = seconds_since(start);
    entry->config = selection.config;
    entry->match_kind = selection.kind;

    start = Clock::now();
    try {
        entry->handle = compiler_.compile(definition_.render_compile_request(entry->config), device);
    } catch (const CompileError& e) {
        if (entry->config == fallback) {
            throw DispatchError(e.what(), entry->config, e.diagnostics);
        }

        entry->note = "configuration " + entry->config.to_string() + " failed to compile: " + e.diagnostics;
        entry->retried_default = true;
        entry->config = fallback;
        try {
            entry->handle = compiler_.compile(definition_.render_compile_request(entry->config), device);
        } catch (const CompileError& e2) {
            throw DispatchError(e2.what(), entry->config, e2.diagnostics);
        }
    } catch (const EvalError& e) {
        throw DispatchError(e.what(), entry->config, {});
    }
    entry->timings[stage::compile] = seconds_since(start);

    start = Clock::now();
    executor_.load(entry->handle);
    entry->timings[stage::module_load] = seconds_since(start);

    return entry;
}

void WisdomKernel::maybe_capture(const ProblemSize& problem, const LaunchArgs& args) {
    if (!capture_.should_capture(definition_.name())) {
        return;
    }

    {
        std::lock_guard lock(mutex_);
        if (!captured_.insert(problem).second) {
            return;
        }
    }

    std::filesystem::create_directories(capture_.directory);
    write_capture(
        Capture::from_launch(definition_, args, application_),
        capture_file_name(capture_.directory, definition_, problem));
}

LaunchReport WisdomKernel::launch(const DeviceIdent& device, const LaunchArgs& args) {
    ScalarArgs scalars = scalar_args_of(args);
    ProblemSize problem = definition_.derive_problem_size(scalars);
    Key key {device.name, problem};

    std::shared_future<std::shared_ptr<const Entry>> future;
    std::promise<std::shared_ptr<const Entry>> promise;
    bool owner = false;
    {
        std::lock_guard lock(mutex_);
        auto it = cache_.find(key);
        if (it != cache_.end()) {
            future = it->second;
        } else {
            future = promise.get_future().share();
            cache_.emplace(key, future);
            owner = true;
        }
    }

    if (owner) {
        try {
            promise.set_value(prepare(device, problem));
        } catch (...) {
            {
                std::lock_guard lock(mutex_);
                cache_.erase(key);
            }
            promise.set_exception(std::current_exception());
        }
    }

    std::shared_ptr<const Entry> entry = future.get();

    maybe_capture(problem, args);

    LaunchReport report;
    report.kernel_name = definition_.name();
    report.device_name = device.name;
    report.problem = problem;
    report.config = entry->config;
    report.match_kind = entry->match_kind;
    report.cache_hit = !owner;
    report.retried_default = entry->retried_default;
    report.note = entry->note;
    if (owner) {
        report.stage_timings = entry->timings;
    }

    report.geometry = definition_.derive_geometry(entry->config, problem, scalars);

    auto start = Clock::now();
    report.measurement = executor_.launch(entry->handle, report.geometry, args);
    report.stage_timings[stage::launch] = seconds_since(start);

    record(report);

    if (!report.measurement.ok()) {
        throw Error(
            "launch of " + definition_.name() + " failed (" + status_name(report.measurement.status)
            + "): " + report.measurement.diagnostics);
    }
    return report;
}

void WisdomKernel::record(const LaunchReport& report) {
    std::lock_guard lock(mutex_);
    reports_.push_back(report);

    if (log_path_) {
        std::ofstream out(*log_path_, std::ios::app);
        if (!out) {
            throw IoError("cannot append to " + log_path_->string());
        }
        out << canonical_json(to_json(report)) << '\n';
    }
}

std::size_t WisdomKernel::cache_size() const {
    std::lock_guard lock(mutex_);
    return cache_.size();
}

std::vector<LaunchReport> WisdomKernel::reports() const {
    std::lock_guard lock(mutex_);
    return reports_;
}

OverheadReport WisdomKernel::overhead_report() const {
    std::lock_guard lock(mutex_);
    if (reports_.empty()) {
        throw Error("no launches recorded");
    }

    std::vector<const LaunchReport*> first;
    std::vector<const LaunchReport*> subsequent;
    for (const auto& r : reports_) {
        (r.cache_hit ? subsequent : first).push_back(&r);
    }
    return {mean_of(first), mean_of(subsequent)};
}

}  // namespace tunekit
