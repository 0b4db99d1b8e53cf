#include "tunekit/wisdom.h"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "tunekit/fs.h"

namespace tunekit {

nlohmann::json to_json(const WisdomRecord& r) {
    return {
        {"device", to_json(r.device)},
        {"problem", to_json(r.problem)},
        {"config", to_json(r.config)},
        {"objective", r.objective_seconds},
        {"provenance",
         {
             {"date", r.provenance.date},
             {"software", r.provenance.software},
             {"hostname", r.provenance.hostname},
             {"gpu", r.provenance.gpu},
         }},
    };
}

WisdomRecord record_from_json(const nlohmann::json& j) {
    WisdomRecord r;
    try {
        r.device = device_from_json(j.at("device"));
        r.problem = problem_from_json(j.at("problem"));
        r.config = configuration_from_json(j.at("config"));
        r.objective_seconds = j.at("objective").get<double>();

        const auto& p = j.at("provenance");
        r.provenance.date = p.at("date").get<std::string>();
        r.provenance.software = p.at("software").get<std::map<std::string, std::string>>();
        r.provenance.hostname = p.at("hostname").get<std::string>();
        r.provenance.gpu = p.at("gpu").get<std::map<std::string, std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed wisdom record: ") + e.what());
    }

    if (!(r.objective_seconds > 0) || !std::isfinite(r.objective_seconds)) {
        throw FormatError("wisdom record has a non-positive objective");
    }
    return r;
}

WisdomFile::WisdomFile(std::string kernel_key) : kernel_key_(std::move(kernel_key)) {
    if (kernel_key_.empty()) {
        throw Error("kernel key must not be empty");
    }
}

bool WisdomFile::merge(WisdomRecord record) {
    for (auto& existing : records_) {
        if (existing.device.name == record.device.name && existing.problem == record.problem) {
            if (record.objective_seconds < existing.objective_seconds) {
                existing = std::move(record);
                return true;
            }
            return false;
        }
    }

    records_.push_back(std::move(record));
    return true;
}

std::string WisdomFile::to_string() const {
    nlohmann::json header = {
        {"format_version", wisdom_format_version},
        {"kernel_key", kernel_key_},
        {"objective", "time"},
    };

    std::string out = canonical_json(header) + "\n";
    for (const auto& r : records_) {
        out += canonical_json(to_json(r)) + "\n";
    }
    return out;
}

WisdomFile WisdomFile::parse(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        if (end > pos) {
            lines.push_back(text.substr(pos, end - pos));
        }
        pos = end + 1;
    }

    if (lines.empty()) {
        throw FormatError("wisdom file has no header");
    }

    nlohmann::json header;
    std::string kernel_key;
    try {
        header = nlohmann::json::parse(lines[0]);
        if (header.at("format_version").get<int>() != wisdom_format_version) {
            throw FormatError("unsupported wisdom format version");
        }
        if (header.at("objective").get<std::string>() != "time") {
            throw FormatError("unsupported wisdom objective");
        }
        kernel_key = header.at("kernel_key").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed wisdom header: ") + e.what());
    }

    WisdomFile file(kernel_key);
    for (std::size_t i = 1; i < lines.size(); i++) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(lines[i]);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("malformed wisdom record on line " + std::to_string(i + 1) + ": " + e.what());
        }
        file.records_.push_back(record_from_json(j));
    }
    return file;
}

WisdomFile WisdomFile::load(const std::filesystem::path& path) {
    try {
        return parse(read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

WisdomFile WisdomFile::load_or_empty(const std::filesystem::path& path, const std::string& kernel_key) {
    if (!std::filesystem::exists(path)) {
        return WisdomFile(kernel_key);
    }
    return load(path);
}

void WisdomFile::save(const std::filesystem::path& path) const {
    write_file_atomic(path, to_string());
}

std::filesystem::path wisdom_file_name(const std::filesystem::path& dir, const std::string& kernel_key) {
    return dir / (kernel_key + wisdom_extension);
}

WisdomRecord record_from_session(const TuningSession& session) {
    if (!session.best) {
        throw Error("tuning session has no successful evaluation");
    }

    WisdomRecord r;
    r.device = session.device;
    r.problem = session.problem;
    r.config = session.best->config;
    r.objective_seconds = session.best->objective;
    r.provenance.date = utc_timestamp();
    r.provenance.software = {{"tunekit", software_version}};
    r.provenance.hostname = host_name();
    r.provenance.gpu = session.device.attributes;
    r.provenance.gpu["name"] = session.device.name;
    r.provenance.gpu["architecture"] = session.device.architecture;
    return r;
}

WisdomFile append_result(WisdomFile file, const TuningSession& session) {
    if (session.kernel_key != file.kernel_key()) {
        throw Error(
            "session was tuned for kernel key " + session.kernel_key + " but the wisdom file holds "
            + file.kernel_key());
    }

    WisdomRecord record = record_from_session(session);
    if (!session.definition.is_null()) {
        auto def = KernelDefinition::from_json(session.definition);
        if (!def.space().is_valid(record.config)) {
            throw Error("best configuration is not valid in the kernel's space: " + record.config.to_string());
        }
    }

    file.merge(std::move(record));
    return file;
}

const char* match_kind_name(MatchKind k) {
    switch (k) {
        case MatchKind::exact:
            return "exact";
        case MatchKind::same_device_nearest:
            return "same_device_nearest";
        case MatchKind::same_arch_nearest:
            return "same_arch_nearest";
        case MatchKind::any_nearest:
            return "any_nearest";
        case MatchKind::default_config:
            return "default";
    }
    return "?";
}

double problem_distance(const ProblemSize& a, const ProblemSize& b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < 3; i++) {
        double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        sum += d * d;
    }
    return std::sqrt(sum);
}

namespace {

template<typename Pred>
std::optional<std::size_t> nearest_record(const WisdomFile& file, const ProblemSize& problem, Pred&& pred) {
    std::optional<std::size_t> best;
    std::tuple<bool, double, double, std::size_t> best_key;

    const auto& records = file.records();
    for (std::size_t i = 0; i < records.size(); i++) {
        const auto& r = records[i];
        if (!pred(r)) {
            continue;
        }

        auto key = std::make_tuple(
            r.problem.dims() != problem.dims(),
            problem_distance(r.problem, problem),
            r.objective_seconds,
            i);
        if (!best || key < best_key) {
            best = i;
            best_key = key;
        }
    }
    return best;
}

}  // namespace

Selection select(
    const WisdomFile& file,
    const DeviceIdent& device,
    const ProblemSize& problem,
    const Configuration& fallback) {
    auto make = [&](std::size_t index, MatchKind kind) {
        return Selection {file.records()[index].config, kind, index};
    };

    if (auto i = nearest_record(file, problem, [&](const WisdomRecord& r) {
            return r.device.name == device.name && r.problem == problem;
        })) {
        return make(*i, MatchKind::exact);
    }

    if (auto i = nearest_record(file, problem, [&](const WisdomRecord& r) { return r.device.name == device.name; })) {
        return make(*i, MatchKind::same_device_nearest);
    }

    if (auto i = nearest_record(file, problem, [&](const WisdomRecord& r) {
            return r.device.architecture == device.architecture;
        })) {
        return make(*i, MatchKind::same_arch_nearest);
    }

    if (auto i = nearest_record(file, problem, [](const WisdomRecord&) { return true; })) {
        return make(*i, MatchKind::any_nearest);
    }

    return Selection {fallback, MatchKind::default_config, std::nullopt};
}

}  // namespace tunekit
