#include "tunekit/report.h"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace tunekit {

namespace {

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    return out + "\"";
}

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); i++) {
        char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back() += '"';
                i++;
            } else if (c == '"') {
                quoted = false;
            } else {
                fields.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else if (c != '\r') {
            fields.back() += c;
        }
    }
    if (quoted) {
        throw FormatError("unterminated quote in CSV line");
    }
    return fields;
}

}  // namespace

void Scenario::validate() const {
    if (kernel_key.empty() || precision.empty() || device_name.empty()) {
        throw Error("scenario components must not be empty");
    }
}

std::string Scenario::label() const {
    std::string p;
    for (auto c : problem.components()) {
        p += (p.empty() ? "" : "x") + std::to_string(c);
    }
    return kernel_key + "/" + p + "/" + precision + "/" + device_name;
}

Scenario Scenario::of(const TuningSession& session) {
    Scenario s {session.kernel_key, session.problem, session.precision, session.device.name};
    s.validate();
    return s;
}

std::optional<double> replay_objective(const TuningSession& session, const Configuration& config) {
    if (const Evaluation* e = session.find(config)) {
        return e->measurement.objective;
    }

    if (session.executor.value("backend", std::string {}) != "sim" || session.definition.is_null()) {
        return std::nullopt;
    }

    auto definition = KernelDefinition::from_json(session.definition);
    auto space = std::make_shared<const ConfigSpace>(definition.space());
    if (!space->is_valid(config)) {
        return std::nullopt;
    }

    auto executor = sim_executor_from_description(session.executor, space);
    Measurement m = executor->benchmark({definition, config, session.problem});
    return m.objective;
}

double fraction_of_optimum(const TuningSession& session, const Configuration& config, const Evaluator& evaluator) {
    if (!session.best) {
        throw Error("session has no successful evaluation");
    }

    auto objective = evaluator(session, config);
    if (!objective) {
        throw Error("configuration has no successful measurement: " + config.to_string());
    }
    return session.best->objective / *objective;
}

std::vector<std::optional<double>> efficiencies_of(
    const Configuration& config,
    std::span<const TuningSession> sessions,
    const Evaluator& evaluator) {
    std::vector<std::optional<double>> out;
    for (const auto& s : sessions) {
        if (!s.best) {
            throw Error("session " + Scenario::of(s).label() + " has no successful evaluation");
        }

        auto objective = evaluator(s, config);
        if (objective && *objective > 0) {
            out.push_back(std::min(1.0, s.best->objective / *objective));
        } else {
            out.push_back(std::nullopt);
        }
    }
    return out;
}

EfficiencyMatrix cross_matrix(std::span<const TuningSession> sessions, const Evaluator& evaluator) {
    EfficiencyMatrix m;
    std::optional<ConfigSpace> space;
    for (const auto& s : sessions) {
        auto def_space = KernelDefinition::from_json(s.definition).space();
        if (space && !(*space == def_space)) {
            throw Error("sessions do not share one search space");
        }
        space = std::move(def_space);
        m.scenarios.push_back(Scenario::of(s));
    }

    for (std::size_t i = 0; i < sessions.size(); i++) {
        if (!sessions[i].best) {
            throw Error("session " + m.scenarios[i].label() + " has no successful evaluation");
        }
        auto row = efficiencies_of(sessions[i].best->config, sessions, evaluator);
        row[i] = 1.0;
        m.entries.push_back(std::move(row));
    }
    return m;
}

PortabilityScore ppm(std::span<const std::optional<double>> efficiencies) {
    if (efficiencies.empty()) {
        throw Error("performance portability needs at least one scenario");
    }

    PortabilityScore score;
    bool all_supported = true;
    double worst = 1.0;
    double reciprocal_sum = 0.0;

    for (const auto& e : efficiencies) {
        if (!e) {
            all_supported = false;
            continue;
        }
        if (!(*e > 0.0 && *e <= 1.0)) {
            throw Error("efficiency " + std::to_string(*e) + " is outside (0, 1]");
        }
        score.best = std::max(score.best, *e);
        worst = std::min(worst, *e);
        reciprocal_sum += 1.0 / *e;
    }

    if (all_supported) {
        score.worst = worst;
        // Rounding can push the mean an ulp outside [worst, best].
        score.ppm = std::clamp(static_cast<double>(efficiencies.size()) / reciprocal_sum, worst, score.best);
    }
    return score;
}

Histogram histogram(
    const TuningSession& session,
    std::size_t bins,
    const std::optional<Configuration>& reference,
    const Evaluator& evaluator) {
    if (bins == 0) {
        throw Error("histogram needs at least one bin");
    }
    if (session.evaluations.empty()) {
        throw Error("session has no evaluations");
    }
    if (!session.best) {
        throw Error("session has no successful evaluation");
    }

    Histogram h;
    h.counts.assign(bins, 0);
    for (const auto& e : session.evaluations) {
        if (!e.measurement.ok()) {
            continue;
        }
        double f = session.best->objective / *e.measurement.objective;
        auto bin = static_cast<std::size_t>(std::floor(f * static_cast<double>(bins)));
        h.counts[std::min(bin, bins - 1)]++;
    }

    auto marker = [&](std::string label, const Configuration& config) {
        std::optional<double> fraction;
        if (auto objective = evaluator(session, config)) {
            fraction = session.best->objective / *objective;
        }
        h.markers.push_back({std::move(label), fraction});
    };

    auto definition = KernelDefinition::from_json(session.definition);
    marker("default", definition.space().default_config().config);
    if (reference) {
        marker("reference", *reference);
    }
    return h;
}

std::string histogram_csv(const Histogram& h) {
    std::string out = "bin_low,bin_high,count,marker\n";
    double bins = static_cast<double>(h.counts.size());
    for (std::size_t i = 0; i < h.counts.size(); i++) {
        out += fixed(static_cast<double>(i) / bins, 4) + "," + fixed(static_cast<double>(i + 1) / bins, 4) + ","
            + std::to_string(h.counts[i]) + ",\n";
    }
    for (const auto& m : h.markers) {
        if (m.fraction) {
            std::string f = fixed(*m.fraction, 4);
            out += f + "," + f + ",," + csv_field(m.label) + "\n";
        }
    }
    return out;
}

std::string matrix_csv(const EfficiencyMatrix& m, std::span<const MatrixRow> extra_rows) {
    std::string out = "row,column,fraction\n";
    auto emit = [&](const std::string& label, const std::vector<std::optional<double>>& row) {
        for (std::size_t j = 0; j < row.size(); j++) {
            out += csv_field(label) + "," + csv_field(m.scenarios[j].label()) + ","
                + (row[j] ? fixed(*row[j], 6) : "") + "\n";
        }
    };

    for (std::size_t i = 0; i < m.entries.size(); i++) {
        emit(m.scenarios[i].label(), m.entries[i]);
    }
    for (const auto& r : extra_rows) {
        emit(r.label, r.fractions);
    }
    return out;
}

std::vector<MatrixRow> parse_matrix_csv(std::string_view text) {
    std::vector<MatrixRow> rows;
    std::size_t pos = 0;
    std::size_t line_no = 0;

    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        line_no++;
        if (line.empty() || line == "\r") {
            continue;
        }

        auto fields = split_csv_line(line);
        if (line_no == 1) {
            if (fields != std::vector<std::string> {"row", "column", "fraction"}) {
                throw FormatError("expected header row,column,fraction");
            }
            continue;
        }
        if (fields.size() != 3) {
            throw FormatError("line " + std::to_string(line_no) + ": expected 3 fields");
        }

        std::optional<double> fraction;
        if (!fields[2].empty()) {
            try {
                std::size_t used = 0;
                fraction = std::stod(fields[2], &used);
                if (used != fields[2].size()) {
                    throw std::invalid_argument(fields[2]);
                }
            } catch (const std::exception&) {
                throw FormatError("line " + std::to_string(line_no) + ": invalid fraction '" + fields[2] + "'");
            }
        }

        auto it = std::find_if(rows.begin(), rows.end(), [&](const MatrixRow& r) { return r.label == fields[0]; });
        if (it == rows.end()) {
            rows.push_back({fields[0], {}});
            it = rows.end() - 1;
        }
        it->fractions.push_back(fraction);
    }

    if (line_no == 0) {
        throw FormatError("empty matrix file");
    }
    return rows;
}

std::string ppm_csv(std::span<const PortabilityRow> rows) {
    std::string out = "label,best,worst,ppm\n";
    for (const auto& r : rows) {
        out += csv_field(r.label) + "," + fixed(r.score.best, 4) + "," + fixed(r.score.worst, 4) + ","
            + fixed(r.score.ppm, 4) + "\n";
    }
    return out;
}

}  // namespace tunekit
