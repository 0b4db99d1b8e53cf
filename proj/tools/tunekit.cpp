#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "tunekit/capture.h"
#include "tunekit/example.h"
#include "tunekit/fs.h"
#include "tunekit/report.h"
#include "tunekit/tuner.h"
#include "tunekit/wisdom.h"

using namespace tunekit;
namespace fs = std::filesystem;

namespace {

constexpr int exit_domain_error = 1;
constexpr int exit_usage_error = 2;

struct CliConfig {
    fs::path wisdom_dir = ".";
    fs::path capture_dir = ".";
    std::string backend = "sim";
    std::string benchmark_command;
    double budget_seconds = 900.0;
    std::optional<std::size_t> max_evaluations;
    std::uint64_t seed = 0;
    std::uint64_t model_seed = 1;
    double noise_sigma = 0.0;
    DeviceIdent device = {"SimGPU", "sim", {}};

    static CliConfig load(const std::optional<fs::path>& explicit_path) {
        CliConfig c;
        fs::path path = explicit_path ? *explicit_path : fs::path("klconfig.json");
        if (!explicit_path && !fs::exists(path)) {
            return c;
        }

        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_file(path));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(path.string() + ": " + e.what());
        }
        if (!j.is_object()) {
            throw FormatError(path.string() + ": expected a JSON object");
        }

        try {
            for (const auto& [key, value] : j.items()) {
                if (key == "wisdom_dir") {
                    c.wisdom_dir = value.get<std::string>();
                } else if (key == "capture_dir") {
                    c.capture_dir = value.get<std::string>();
                } else if (key == "backend") {
                    c.backend = value.get<std::string>();
                } else if (key == "benchmark_command") {
                    c.benchmark_command = value.get<std::string>();
                } else if (key == "budget_seconds") {
                    c.budget_seconds = value.get<double>();
                } else if (key == "max_evaluations") {
                    c.max_evaluations = value.get<std::size_t>();
                } else if (key == "seed") {
                    c.seed = value.get<std::uint64_t>();
                } else if (key == "model_seed") {
                    c.model_seed = value.get<std::uint64_t>();
                } else if (key == "noise_sigma") {
                    c.noise_sigma = value.get<double>();
                } else if (key == "device") {
                    c.device = device_from_json(value);
                } else {
                    throw FormatError("unknown key '" + key + "'");
                }
            }
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(path.string() + ": " + e.what());
        } catch (const FormatError& e) {
            throw FormatError(path.string() + ": " + e.what());
        }
        return c;
    }
};

std::vector<KernelDefinition> builtin_definitions() {
    std::vector<KernelDefinition> defs;
    for (const char* name : {"advec_u", "diff_uvw"}) {
        for (const char* precision : {"float", "double"}) {
            defs.push_back(example_stencil_definition(name, precision));
        }
    }
    return defs;
}

std::optional<KernelDefinition> builtin_by_key(const std::string& key) {
    for (auto& d : builtin_definitions()) {
        if (d.kernel_key() == key) {
            return d;
        }
    }
    return std::nullopt;
}

void print_json(const nlohmann::json& j) {
    std::cout << canonical_json(j) << "\n";
}

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
    } else {
        write_file_atomic(path, text);
    }
}

std::string format_seconds(double s) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g s", s);
    return buf;
}

// capture ---------------------------------------------------------------

void capture_ls(const fs::path& dir, bool json) {
    if (!fs::is_directory(dir)) {
        throw IoError("not a directory: " + dir.string());
    }

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == capture_extension) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());

    nlohmann::json list = nlohmann::json::array();
    for (const auto& f : files) {
        auto meta = read_capture_metadata(f);
        nlohmann::json item = {
            {"file", f.filename().string()},
            {"kernel", meta.at("definition").at("name")},
            {"problem", meta.at("problem")},
            {"timestamp", meta.at("timestamp")},
            {"bytes", fs::file_size(f)},
        };
        if (json) {
            list.push_back(item);
        } else {
            std::cout << f.filename().string() << "  " << item["kernel"].get<std::string>() << "  "
                      << problem_from_json(meta.at("problem")).to_string() << "  " << fs::file_size(f)
                      << " bytes\n";
        }
    }
    if (json) {
        print_json(list);
    }
}

void capture_show(const fs::path& file, bool json) {
    auto meta = read_capture_metadata(file);
    if (json) {
        print_json(meta);
        return;
    }

    auto def = KernelDefinition::from_json(meta.at("definition"));
    std::cout << "kernel:      " << def.name() << "\n"
              << "kernel key:  " << def.kernel_key() << "\n"
              << "problem:     " << problem_from_json(meta.at("problem")).to_string() << "\n"
              << "timestamp:   " << meta.at("timestamp").get<std::string>() << "\n"
              << "application: " << meta.at("application").get<std::string>() << "\n"
              << "parameters:  " << def.space().dimensions() << " (" << def.space().cardinality()
              << " configurations before restrictions)\n"
              << "arguments:\n";

    std::size_t i = 0;
    for (const auto& a : meta.at("args")) {
        std::cout << "  arg" << i++ << ": ";
        if (a.at("kind") == "scalar") {
            std::cout << a.at("type").get<std::string>() << " " << a.at("value").dump() << "\n";
        } else {
            std::cout << a.at("role").get<std::string>() << " " << a.at("type").get<std::string>() << "["
                      << a.at("count").get<std::uint64_t>() << "]\n";
        }
    }
}

struct CreateOptions {
    std::string definition;
    std::string builtin = "advec_u";
    std::string precision = "float";
    std::vector<std::int64_t> args;
    std::uint64_t buffer_elements = 0;
    std::string output;
};

void capture_create(const CreateOptions& o, const CliConfig& config) {
    KernelDefinition def = o.definition.empty() ? example_stencil_definition(o.builtin, o.precision)
                                                : KernelDefinition::load(o.definition);

    ElementType element = o.precision == "double" ? ElementType::f64 : ElementType::f32;
    if (o.precision != "float" && o.precision != "double") {
        throw Error("precision must be float or double");
    }

    std::vector<std::byte> input(o.buffer_elements * element_size(element));
    SplitMix64 rng(0);
    for (std::uint64_t i = 0; i < o.buffer_elements; i++) {
        if (element == ElementType::f32) {
            auto v = static_cast<float>(rng.uniform());
            std::memcpy(&input[i * sizeof(v)], &v, sizeof(v));
        } else {
            double v = rng.uniform();
            std::memcpy(&input[i * sizeof(v)], &v, sizeof(v));
        }
    }
    std::vector<std::byte> output(input.size());

    LaunchArgs args;
    for (auto v : o.args) {
        args.push_back(ScalarArg::integer(v));
    }
    if (o.buffer_elements > 0) {
        args.push_back(BufferView {BufferRole::output, element, output});
        args.push_back(BufferView {BufferRole::input, element, input});
    }

    Capture capture = Capture::from_launch(def, args, "tunekit capture create");
    fs::path path = o.output.empty() ? capture_file_name(config.capture_dir, def, capture.problem) : fs::path(o.output);
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    write_capture(capture, path);
    std::cout << path.string() << "\n";
}

// tune ------------------------------------------------------------------

struct TuneCliOptions {
    std::string capture;
    std::string strategy = "surrogate";
    std::optional<double> budget_seconds;
    std::optional<std::size_t> max_evaluations;
    std::optional<std::string> backend;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> model_seed;
    std::optional<double> noise;
    std::string fail_when;
    std::optional<std::string> wisdom;
    bool no_wisdom = false;
    std::string session;
    std::optional<std::string> device;
    std::optional<std::string> arch;
};

int tune_command(const TuneCliOptions& o, const CliConfig& config, bool json) {
    Capture capture = read_capture(o.capture);
    auto space = std::make_shared<const ConfigSpace>(capture.definition.space());

    DeviceIdent device = config.device;
    if (o.device) {
        device.name = *o.device;
    }
    if (o.arch) {
        device.architecture = *o.arch;
    }

    Budget budget;
    budget.max_wall_seconds = o.budget_seconds.value_or(config.budget_seconds);
    budget.max_evaluations = o.max_evaluations ? o.max_evaluations : config.max_evaluations;

    std::string backend = o.backend.value_or(config.backend);
    std::unique_ptr<Executor> executor;
    if (backend == "sim") {
        std::optional<Expr> failure;
        if (!o.fail_when.empty()) {
            failure = parse_expr(o.fail_when);
        }
        auto model = std::make_shared<const SimCostModel>(
            space,
            o.model_seed.value_or(config.model_seed),
            o.noise.value_or(config.noise_sigma),
            failure);
        executor = std::make_unique<SimExecutor>(device, model);
    } else if (backend == "subprocess") {
        if (config.benchmark_command.empty()) {
            throw Error("the subprocess backend needs benchmark_command in klconfig.json");
        }
        executor = std::make_unique<SubprocessExecutor>(device, config.benchmark_command);
    } else {
        throw Error("unknown backend '" + backend + "' (expected sim or subprocess)");
    }

    TuneOptions options;
    options.capture_path = o.capture;
    TuningSession session = tune(
        capture,
        *space,
        parse_strategy(o.strategy),
        budget,
        *executor,
        o.seed.value_or(config.seed),
        options);

    fs::path session_path = o.session;
    if (session_path.empty()) {
        session_path = fs::path(o.capture).stem().string() + "." + o.strategy + session_extension;
    }
    save_session(session, session_path);

    std::optional<fs::path> wisdom_path;
    if (!o.no_wisdom && session.best) {
        fs::path dir = o.wisdom ? fs::path(*o.wisdom) : config.wisdom_dir;
        fs::create_directories(dir);
        wisdom_path = wisdom_file_name(dir, session.kernel_key);
        append_result(WisdomFile::load_or_empty(*wisdom_path, session.kernel_key), session).save(*wisdom_path);
    }

    if (json) {
        nlohmann::json out = {
            {"session", session_path.string()},
            {"evaluations", session.evaluations.size()},
            {"status", session_status_name(session.status())},
            {"best", session.best ? nlohmann::json {{"config", to_json(session.best->config)}, {"objective", session.best->objective}} : nlohmann::json()},
            {"wisdom", wisdom_path ? nlohmann::json(wisdom_path->string()) : nlohmann::json()},
        };
        print_json(out);
    } else {
        std::cout << "session:     " << session_path.string() << "\n"
                  << "evaluations: " << session.evaluations.size() << "\n";
        if (session.best) {
            std::cout << "best:        " << session.best->config.to_string() << "\n"
                      << "objective:   " << format_seconds(session.best->objective) << "\n";
        }
        if (wisdom_path) {
            std::cout << "wisdom:      " << wisdom_path->string() << "\n";
        }
    }

    if (!session.best) {
        std::cerr << "tunekit: error: no configuration was measured successfully\n";
        return exit_domain_error;
    }
    return 0;
}

// wisdom ----------------------------------------------------------------

struct BestOptions {
    std::string file;
    std::string device;
    std::string arch;
    std::string problem;
    std::string definition;
};

void wisdom_best(const BestOptions& o, bool json) {
    std::optional<WisdomFile> file;
    if (fs::exists(o.file) && fs::file_size(o.file) > 0) {
        file = WisdomFile::load(o.file);
    } else if (!fs::exists(o.file)) {
        throw IoError("cannot open " + o.file);
    }

    std::optional<KernelDefinition> def;
    if (!o.definition.empty()) {
        def = KernelDefinition::load(o.definition);
    } else if (file) {
        def = builtin_by_key(file->kernel_key());
    }

    Configuration fallback;
    if (def) {
        fallback = def->space().default_config().config;
    }

    DeviceIdent device {o.device, o.arch.empty() ? o.device : o.arch, {}};
    ProblemSize problem = ProblemSize::parse(o.problem);

    Selection s = file ? select(*file, device, problem, fallback)
                       : Selection {fallback, MatchKind::default_config, std::nullopt};

    if (json) {
        print_json({
            {"match_kind", match_kind_name(s.kind)},
            {"config", to_json(s.config)},
            {"record", s.record ? nlohmann::json(*s.record) : nlohmann::json()},
        });
        return;
    }

    std::cout << "match_kind: " << match_kind_name(s.kind) << "\n";
    if (s.record) {
        const auto& r = file->records()[*s.record];
        std::cout << "record:     " << *s.record << " (" << r.device.name << ", " << r.problem.to_string() << ", "
                  << format_seconds(r.objective_seconds) << ")\n";
    }
    std::cout << "config:     " << (s.config.empty() ? "(no definition available)" : s.config.to_string()) << "\n";
}

void wisdom_show(const std::string& path, bool json) {
    WisdomFile file = WisdomFile::load(path);
    if (json) {
        std::cout << file.to_string();
        return;
    }

    std::cout << "kernel key: " << file.kernel_key() << "\n"
              << "records:    " << file.records().size() << "\n";
    for (std::size_t i = 0; i < file.records().size(); i++) {
        const auto& r = file.records()[i];
        std::cout << "[" << i << "] " << r.device.name << " (" << r.device.architecture << ")  "
                  << r.problem.to_string() << "  " << format_seconds(r.objective_seconds) << "  "
                  << r.provenance.date << "\n"
                  << "    " << r.config.to_string() << "\n";
    }
}

void wisdom_merge(const std::string& output, const std::vector<std::string>& inputs) {
    std::optional<WisdomFile> merged;
    if (fs::exists(output)) {
        merged = WisdomFile::load(output);
    }

    for (const auto& in : inputs) {
        WisdomFile f = WisdomFile::load(in);
        if (!merged) {
            merged = WisdomFile(f.kernel_key());
        }
        if (f.kernel_key() != merged->kernel_key()) {
            throw Error(in + " holds kernel key " + f.kernel_key() + ", expected " + merged->kernel_key());
        }
        for (const auto& r : f.records()) {
            merged->merge(r);
        }
    }
    merged->save(output);
    std::cout << output << ": " << merged->records().size() << " records\n";
}

// report ----------------------------------------------------------------

void report_histogram(const std::string& session_path, std::size_t bins, const std::string& reference,
                      const std::string& output, bool json) {
    TuningSession session = load_session(session_path);
    std::optional<Configuration> ref;
    if (!reference.empty()) {
        try {
            ref = configuration_from_json(nlohmann::json::parse(reference));
        } catch (const nlohmann::json::exception& e) {
            throw Error(std::string("invalid --reference: ") + e.what());
        }
    }

    Histogram h = histogram(session, bins, ref);
    if (json) {
        nlohmann::json markers = nlohmann::json::array();
        for (const auto& m : h.markers) {
            markers.push_back({{"label", m.label}, {"fraction", m.fraction ? nlohmann::json(*m.fraction) : nlohmann::json()}});
        }
        write_output(output, canonical_json({{"counts", h.counts}, {"markers", markers}}) + "\n");
    } else {
        write_output(output, histogram_csv(h));
    }
}

void report_matrix(const std::vector<std::string>& paths, const std::string& output, bool include_default, bool json) {
    std::vector<TuningSession> sessions;
    for (const auto& p : paths) {
        sessions.push_back(load_session(p));
    }

    EfficiencyMatrix m = cross_matrix(sessions);
    std::vector<MatrixRow> extra;
    if (include_default) {
        auto def = KernelDefinition::from_json(sessions.front().definition);
        extra.push_back({"default", efficiencies_of(def.space().default_config().config, sessions)});
    }

    if (!json) {
        write_output(output, matrix_csv(m, extra));
        return;
    }

    auto row_json = [](const std::vector<std::optional<double>>& row) {
        nlohmann::json r = nlohmann::json::array();
        for (const auto& e : row) {
            r.push_back(e ? nlohmann::json(*e) : nlohmann::json());
        }
        return r;
    };

    nlohmann::json labels = nlohmann::json::array();
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < m.scenarios.size(); i++) {
        labels.push_back(m.scenarios[i].label());
        rows.push_back({{"label", m.scenarios[i].label()}, {"fractions", row_json(m.entries[i])}});
    }
    for (const auto& r : extra) {
        rows.push_back({{"label", r.label}, {"fractions", row_json(r.fractions)}});
    }
    write_output(output, canonical_json({{"scenarios", labels}, {"rows", rows}}) + "\n");
}

void report_ppm(const std::string& matrix_path, const std::string& values, const std::string& output, bool json) {
    std::vector<PortabilityRow> rows;

    if (!values.empty()) {
        std::vector<std::optional<double>> effs;
        std::size_t pos = 0;
        while (pos <= values.size()) {
            std::size_t end = values.find(',', pos);
            if (end == std::string::npos) {
                end = values.size();
            }
            std::string item = values.substr(pos, end - pos);
            if (item.empty() || item == "absent") {
                effs.push_back(std::nullopt);
            } else {
                try {
                    effs.push_back(std::stod(item));
                } catch (const std::exception&) {
                    throw Error("invalid efficiency '" + item + "'");
                }
            }
            pos = end + 1;
        }
        rows.push_back({"values", ppm(effs)});
    } else {
        for (const auto& r : parse_matrix_csv(read_file(matrix_path))) {
            rows.push_back({r.label, ppm(r.fractions)});
        }
    }

    if (json) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& r : rows) {
            out.push_back({{"label", r.label}, {"best", r.score.best}, {"worst", r.score.worst}, {"ppm", r.score.ppm}});
        }
        write_output(output, canonical_json(out) + "\n");
    } else {
        write_output(output, ppm_csv(rows));
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app {"Capture, tune, select and report on tunable compute kernels.", "tunekit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", software_version);

    std::optional<std::string> config_path;
    bool json = false;
    app.add_option("--config", config_path, "Configuration file (default: ./klconfig.json if present)");
    app.add_flag("--json", json, "Machine-readable output");

    // capture
    auto* capture = app.add_subcommand("capture", "Inspect and create capture files");
    capture->require_subcommand(1);

    std::string ls_dir;
    auto* capture_ls_cmd = capture->add_subcommand("ls", "List captures in a directory");
    capture_ls_cmd->add_option("dir", ls_dir, "Directory (default: capture_dir from the configuration)");

    std::string show_file;
    auto* capture_show_cmd = capture->add_subcommand("show", "Print a capture's metadata");
    capture_show_cmd->add_option("file", show_file, "Capture file")->required();

    CreateOptions create;
    auto* capture_create_cmd = capture->add_subcommand("create", "Write a synthetic capture for a kernel definition");
    capture_create_cmd->add_option("--definition", create.definition, "Kernel definition JSON file");
    capture_create_cmd->add_option("--builtin", create.builtin, "Built-in kernel: advec_u or diff_uvw")
        ->check(CLI::IsMember({"advec_u", "diff_uvw"}))
        ->capture_default_str();
    capture_create_cmd->add_option("--precision", create.precision, "float or double")
        ->check(CLI::IsMember({"float", "double"}))
        ->capture_default_str();
    capture_create_cmd->add_option("--args", create.args, "Integer scalar arguments in order")
        ->delimiter(',')
        ->required();
    capture_create_cmd->add_option("--buffer-elements", create.buffer_elements, "Elements per input/output buffer")
        ->capture_default_str();
    capture_create_cmd->add_option("-o,--output", create.output, "Output file (default: <capture_dir>/<kernel>_<problem>.klcap)");

    // tune
    TuneCliOptions tune_opts;
    auto* tune_cmd = app.add_subcommand("tune", "Tune a captured launch and record the best configuration");
    tune_cmd->add_option("capture", tune_opts.capture, "Capture file")->required();
    tune_cmd->add_option("--strategy", tune_opts.strategy, "exhaustive, random or surrogate")
        ->check(CLI::IsMember({"exhaustive", "random", "surrogate"}))
        ->capture_default_str();
    tune_cmd->add_option("--budget-seconds", tune_opts.budget_seconds, "Time budget (default 900)");
    tune_cmd->add_option("--max-evaluations", tune_opts.max_evaluations, "Evaluation budget");
    tune_cmd->add_option("--backend", tune_opts.backend, "sim or subprocess (default sim)");
    tune_cmd->add_option("--seed", tune_opts.seed, "Search seed");
    tune_cmd->add_option("--model-seed", tune_opts.model_seed, "Seed of the simulated landscape (default 1)");
    tune_cmd->add_option("--noise", tune_opts.noise, "Relative measurement noise of the sim backend");
    tune_cmd->add_option("--fail-when", tune_opts.fail_when, "Expression; matching configurations fail on the sim backend");
    tune_cmd->add_option("--wisdom", tune_opts.wisdom, "Wisdom directory to append the result to");
    tune_cmd->add_flag("--no-wisdom", tune_opts.no_wisdom, "Do not update wisdom");
    tune_cmd->add_option("--session", tune_opts.session, "Session log (default: <capture>.<strategy>.klsession)");
    tune_cmd->add_option("--device", tune_opts.device, "Device name");
    tune_cmd->add_option("--arch", tune_opts.arch, "Device architecture");

    // wisdom
    auto* wisdom = app.add_subcommand("wisdom", "Query and maintain wisdom files");
    wisdom->require_subcommand(1);

    BestOptions best;
    auto* wisdom_best_cmd = wisdom->add_subcommand("best", "Select the configuration for a device and problem size");
    wisdom_best_cmd->add_option("file", best.file, "Wisdom file")->required();
    wisdom_best_cmd->add_option("--device", best.device, "Device name")->required();
    wisdom_best_cmd->add_option("--arch", best.arch, "Device architecture");
    wisdom_best_cmd->add_option("--problem", best.problem, "Problem size X[,Y[,Z]]")->required();
    wisdom_best_cmd->add_option("--definition", best.definition, "Kernel definition supplying the default configuration");

    std::string wisdom_show_file;
    auto* wisdom_show_cmd = wisdom->add_subcommand("show", "Print the records of a wisdom file");
    wisdom_show_cmd->add_option("file", wisdom_show_file, "Wisdom file")->required();

    std::string merge_output;
    std::vector<std::string> merge_inputs;
    auto* wisdom_merge_cmd = wisdom->add_subcommand("merge", "Merge wisdom files, keeping the fastest record");
    wisdom_merge_cmd->add_option("output", merge_output, "Wisdom file to update")->required();
    wisdom_merge_cmd->add_option("inputs", merge_inputs, "Wisdom files to merge in")->required();

    // report
    auto* report = app.add_subcommand("report", "Analyse sessions and efficiency matrices");
    report->require_subcommand(1);

    std::string hist_session;
    std::size_t hist_bins = 20;
    std::string hist_reference;
    std::string hist_output;
    auto* report_histogram_cmd = report->add_subcommand("histogram", "Distribution of fraction of optimum");
    report_histogram_cmd->add_option("session", hist_session, "Session log")->required();
    report_histogram_cmd->add_option("--bins", hist_bins, "Number of bins")->capture_default_str();
    report_histogram_cmd->add_option("--reference", hist_reference, "Reference configuration as a JSON object");
    report_histogram_cmd->add_option("-o,--output", hist_output, "Output file (default: stdout)");

    std::vector<std::string> matrix_sessions;
    std::string matrix_output;
    bool matrix_default = false;
    auto* report_matrix_cmd = report->add_subcommand("matrix", "Cross-scenario fraction of optimum");
    report_matrix_cmd->add_option("sessions", matrix_sessions, "Session logs, one per scenario")->required();
    report_matrix_cmd->add_flag("--include-default", matrix_default, "Add a row for the default configuration");
    report_matrix_cmd->add_option("-o,--output", matrix_output, "Output file (default: stdout)");

    std::string ppm_matrix;
    std::string ppm_values;
    std::string ppm_output;
    auto* report_ppm_cmd = report->add_subcommand("ppm", "Performance portability per matrix row");
    auto* ppm_matrix_opt = report_ppm_cmd->add_option("matrix", ppm_matrix, "Matrix CSV (row,column,fraction)");
    auto* ppm_values_opt =
        report_ppm_cmd->add_option("--values", ppm_values, "Comma-separated efficiencies; `absent` marks unsupported");
    ppm_matrix_opt->excludes(ppm_values_opt);
    report_ppm_cmd->add_option("-o,--output", ppm_output, "Output file (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_usage_error;
    }

    try {
        if (report_ppm_cmd->parsed() && ppm_matrix.empty() && ppm_values.empty()) {
            std::cerr << "tunekit: error: report ppm needs a matrix file or --values\n";
            return exit_usage_error;
        }

        CliConfig config = CliConfig::load(config_path ? std::optional<fs::path>(*config_path) : std::nullopt);

        if (capture_ls_cmd->parsed()) {
            capture_ls(ls_dir.empty() ? config.capture_dir : fs::path(ls_dir), json);
        } else if (capture_show_cmd->parsed()) {
            capture_show(show_file, json);
        } else if (capture_create_cmd->parsed()) {
            capture_create(create, config);
        } else if (tune_cmd->parsed()) {
            return tune_command(tune_opts, config, json);
        } else if (wisdom_best_cmd->parsed()) {
            wisdom_best(best, json);
        } else if (wisdom_show_cmd->parsed()) {
            wisdom_show(wisdom_show_file, json);
        } else if (wisdom_merge_cmd->parsed()) {
            wisdom_merge(merge_output, merge_inputs);
        } else if (report_histogram_cmd->parsed()) {
            report_histogram(hist_session, hist_bins, hist_reference, hist_output, json);
        } else if (report_matrix_cmd->parsed()) {
            report_matrix(matrix_sessions, matrix_output, matrix_default, json);
        } else if (report_ppm_cmd->parsed()) {
            report_ppm(ppm_matrix, ppm_values, ppm_output, json);
        }
    } catch (const std::exception& e) {
        std::cerr << "tunekit: error: " << e.what() << "\n";
        return exit_domain_error;
    }

    return 0;
}
