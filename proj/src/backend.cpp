#include <Eigen/Eigenvalues>
#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>

#include "tunekit/backend.h"
#include "tunekit/fs.h"

namespace tunekit {

namespace {

constexpr std::uint64_t noise_stream_salt = 0x6E6F6973655F5F31ULL;

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string dim3_text(const Dim3& d) {
    return std::to_string(d.x) + "," + std::to_string(d.y) + "," + std::to_string(d.z);
}

std::optional<double> parse_seconds(const std::string& output) {
    std::size_t end = output.find_last_not_of(" \t\r\n");
    if (end == std::string::npos) {
        return std::nullopt;
    }
    std::size_t start = output.find_last_of('\n', end);
    start = start == std::string::npos ? 0 : start + 1;

    std::string line = output.substr(start, end - start + 1);
    double v = 0;
    auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
    if (ec != std::errc() || ptr != line.data() + line.size() || !(v > 0) || !std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

}  // namespace

void DeviceIdent::validate() const {
    if (name.empty() || architecture.empty()) {
        throw Error("device name and architecture must not be empty");
    }
}

nlohmann::json to_json(const DeviceIdent& d) {
    return {{"name", d.name}, {"architecture", d.architecture}, {"attributes", d.attributes}};
}

DeviceIdent device_from_json(const nlohmann::json& j) {
    DeviceIdent d;
    d.name = j.at("name").get<std::string>();
    d.architecture = j.at("architecture").get<std::string>();
    if (j.contains("attributes")) {
        d.attributes = j.at("attributes").get<std::map<std::string, std::string>>();
    }
    return d;
}

const char* status_name(MeasurementStatus s) {
    switch (s) {
        case MeasurementStatus::ok:
            return "ok";
        case MeasurementStatus::compile_failed:
            return "compile_failed";
        case MeasurementStatus::launch_failed:
            return "launch_failed";
        case MeasurementStatus::invalid_config:
            return "invalid_config";
    }
    return "?";
}

MeasurementStatus parse_status(std::string_view name) {
    for (auto s :
         {MeasurementStatus::ok,
          MeasurementStatus::compile_failed,
          MeasurementStatus::launch_failed,
          MeasurementStatus::invalid_config}) {
        if (name == status_name(s)) {
            return s;
        }
    }
    throw FormatError("unknown measurement status '" + std::string(name) + "'");
}

Measurement Measurement::success(double objective) {
    Measurement m;
    m.status = MeasurementStatus::ok;
    m.objective = objective;
    return m;
}

Measurement Measurement::failure(MeasurementStatus status, std::string diagnostics) {
    Measurement m;
    m.status = status;
    m.diagnostics = std::move(diagnostics);
    return m;
}

SimCostModel::SimCostModel(
    std::shared_ptr<const ConfigSpace> space,
    std::uint64_t seed,
    double noise_sigma,
    std::optional<Expr> failure_restriction) :
    space_(std::move(space)),
    seed_(seed),
    noise_sigma_(noise_sigma),
    failure_(std::move(failure_restriction)),
    noise_(seed ^ noise_stream_salt) {
    if (noise_sigma_ < 0) {
        throw Error("noise sigma must be non-negative");
    }

    std::size_t d = space_->dimensions();
    SplitMix64 rng(seed);

    mu_.resize(d);
    for (auto& m : mu_) {
        m = rng.uniform();
    }

    a_.assign(d * d, 0.0);
    for (std::size_t i = 0; i < d; i++) {
        a_[i * d + i] = rng.uniform(0.5, 2.0);
    }
    for (std::size_t i = 0; i < d; i++) {
        for (std::size_t j = i + 1; j < d; j++) {
            double v = rng.uniform(-0.3, 0.3);
            a_[i * d + j] = v;
            a_[j * d + i] = v;
        }
    }

    if (d > 0) {
        Eigen::MatrixXd m(d, d);
        for (std::size_t i = 0; i < d; i++) {
            for (std::size_t j = 0; j < d; j++) {
                m(i, j) = a_[i * d + j];
            }
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
        double shift = std::abs(solver.eigenvalues().minCoeff()) + 0.1;
        for (std::size_t i = 0; i < d; i++) {
            a_[i * d + i] += shift;
        }
    }
}

double SimCostModel::cost(std::span<const std::uint32_t> point) const {
    std::vector<double> x = space_->normalized(point);
    std::size_t d = x.size();
    for (std::size_t i = 0; i < d; i++) {
        x[i] -= mu_[i];
    }

    double q = 0.0;
    for (std::size_t i = 0; i < d; i++) {
        double row = 0.0;
        for (std::size_t j = 0; j < d; j++) {
            row += a_[i * d + j] * x[j];
        }
        q += x[i] * row;
    }
    return 1.0 + q;
}

Measurement SimCostModel::measure(std::span<const std::uint32_t> point) const {
    if (!space_->is_valid(point)) {
        return Measurement::failure(MeasurementStatus::invalid_config, "configuration violates a restriction");
    }

    if (failure_) {
        Configuration config = space_->configuration_at(point);
        if (evaluate(*failure_, ConfigEnv(config)).as_boolean()) {
            return Measurement::failure(
                MeasurementStatus::invalid_config,
                "configuration matches failure restriction " + failure_->to_string());
        }
    }

    double c = cost(point);
    if (noise_sigma_ > 0) {
        double g;
        {
            std::lock_guard lock(noise_mutex_);
            g = noise_.gaussian();
        }
        c *= std::max(1.0 + noise_sigma_ * g, 1e-3);
    }
    return Measurement::success(c);
}

Measurement SimCostModel::measure(const Configuration& config) const {
    auto point = space_->point_of(config);
    if (!point) {
        return Measurement::failure(
            MeasurementStatus::invalid_config,
            "configuration is not a point of the space: " + config.to_string());
    }
    return measure(*point);
}

Measurement sim_cost(const SimCostModel& model, const Configuration& config) {
    return model.measure(config);
}

SimExecutor::SimExecutor(
    DeviceIdent device,
    std::shared_ptr<const SimCostModel> model,
    SimExecutorOptions options) :
    device_(std::move(device)),
    model_(std::move(model)),
    options_(options) {
    device_.validate();
    if (options_.repetitions == 0) {
        throw Error("repetitions must be at least 1");
    }
}

Measurement SimExecutor::run(const Configuration& config) const {
    std::vector<double> times;
    times.reserve(options_.repetitions);

    for (std::size_t i = 0; i < options_.repetitions; i++) {
        Measurement m = model_->measure(config);
        if (!m.ok()) {
            m.elapsed_seconds = options_.compile_seconds;
            return m;
        }
        times.push_back(*m.objective * options_.seconds_per_unit);
    }

    double total = 0;
    for (double t : times) {
        total += t;
    }

    Measurement m = Measurement::success(median(times));
    m.stage_timings[stage::compile] = options_.compile_seconds;
    m.stage_timings[stage::launch] = total;
    m.elapsed_seconds = options_.compile_seconds + total;
    return m;
}

Measurement SimExecutor::benchmark(const BenchmarkRequest& request) {
    return run(request.config);
}

Measurement SimExecutor::launch(
    const ExecutableHandle& handle,
    const LaunchGeometry& geometry,
    const LaunchArgs& args) {
    (void)geometry;
    (void)args;

    Measurement m = model_->measure(handle.request.config);
    if (m.ok()) {
        *m.objective *= options_.seconds_per_unit;
        m.elapsed_seconds = *m.objective;
    } else {
        m.status = MeasurementStatus::launch_failed;
    }
    return m;
}

nlohmann::json SimExecutor::describe() const {
    nlohmann::json failure = nullptr;
    if (model_->failure_restriction()) {
        failure = model_->failure_restriction()->to_string();
    }

    return {
        {"backend", "sim"},
        {"device", to_json(device_)},
        {"model_seed", model_->seed()},
        {"noise_sigma", model_->noise_sigma()},
        {"failure_restriction", failure},
        {"repetitions", options_.repetitions},
        {"seconds_per_unit", options_.seconds_per_unit},
        {"compile_seconds", options_.compile_seconds},
    };
}

std::unique_ptr<SimExecutor> sim_executor_from_description(
    const nlohmann::json& description,
    std::shared_ptr<const ConfigSpace> space) {
    if (description.value("backend", std::string {}) != "sim") {
        throw FormatError("executor description is not a simulated backend");
    }

    try {
        std::optional<Expr> failure;
        const auto& f = description.at("failure_restriction");
        if (!f.is_null()) {
            failure = parse_expr(f.get<std::string>());
        }

        auto model = std::make_shared<const SimCostModel>(
            std::move(space),
            description.at("model_seed").get<std::uint64_t>(),
            description.at("noise_sigma").get<double>(),
            failure);

        SimExecutorOptions options;
        options.repetitions = description.at("repetitions").get<std::size_t>();
        options.seconds_per_unit = description.at("seconds_per_unit").get<double>();
        options.compile_seconds = description.at("compile_seconds").get<double>();

        return std::make_unique<SimExecutor>(
            device_from_json(description.at("device")),
            std::move(model),
            options);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed executor description: ") + e.what());
    }
}

SubprocessExecutor::SubprocessExecutor(
    DeviceIdent device,
    std::string benchmark_template,
    std::string launch_template) :
    device_(std::move(device)),
    benchmark_template_(std::move(benchmark_template)),
    launch_template_(std::move(launch_template)) {
    device_.validate();
}

Measurement SubprocessExecutor::run(const std::string& command) {
    std::lock_guard lock(mutex_);

    auto start = std::chrono::steady_clock::now();
    CommandResult result = run_command(command);
    double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    Measurement m;
    if (result.exit_code != 0) {
        m = Measurement::failure(
            MeasurementStatus::launch_failed,
            "exit status " + std::to_string(result.exit_code) + ": " + result.output);
    } else if (auto seconds = parse_seconds(result.output)) {
        m = Measurement::success(*seconds);
    } else {
        m = Measurement::failure(
            MeasurementStatus::launch_failed,
            "benchmark output does not end with a positive time: " + result.output);
    }
    m.elapsed_seconds = elapsed;
    return m;
}

Measurement SubprocessExecutor::benchmark(const BenchmarkRequest& request) {
    LaunchGeometry geometry;
    CompileRequest compile;
    try {
        geometry = request.definition.derive_geometry(
            request.config,
            request.problem,
            request.capture != nullptr ? request.capture->scalar_args() : ScalarArgs {});
        compile = request.definition.render_compile_request(request.config);
    } catch (const EvalError& e) {
        return Measurement::failure(MeasurementStatus::invalid_config, e.what());
    }

    std::string defines;
    for (const auto& d : compile.defines) {
        defines += (defines.empty() ? "" : " ") + d;
    }
    std::string flags;
    for (const auto& f : compile.flags) {
        flags += (flags.empty() ? "" : " ") + f;
    }

    std::string command = substitute_placeholders(
        benchmark_template_,
        {
            {"CAPTURE", request.capture_path},
            {"ENTRY", compile.entry_name},
            {"DEFINES", defines},
            {"FLAGS", flags},
            {"CONFIG", canonical_json(to_json(request.config))},
            {"BLOCK", dim3_text(geometry.block)},
            {"GRID", dim3_text(geometry.grid)},
            {"SHARED", std::to_string(geometry.shared_mem_bytes)},
        });

    return run(command);
}

Measurement SubprocessExecutor::launch(
    const ExecutableHandle& handle,
    const LaunchGeometry& geometry,
    const LaunchArgs& args) {
    (void)args;
    if (launch_template_.empty()) {
        return Measurement::failure(MeasurementStatus::launch_failed, "no launch command configured");
    }

    std::string command = substitute_placeholders(
        launch_template_,
        {
            {"ARTIFACT", handle.artifact.string()},
            {"ENTRY", handle.request.entry_name},
            {"BLOCK", dim3_text(geometry.block)},
            {"GRID", dim3_text(geometry.grid)},
            {"SHARED", std::to_string(geometry.shared_mem_bytes)},
        });
    return run(command);
}

nlohmann::json SubprocessExecutor::describe() const {
    return {
        {"backend", "subprocess"},
        {"device", to_json(device_)},
        {"benchmark_command", benchmark_template_},
        {"launch_command", launch_template_},
    };
}

}  // namespace tunekit
