#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tunekit/tuner.h"

namespace tunekit {

// One tuning target: a kernel on a problem size, precision and device.
struct Scenario {
    std::string kernel_key;
    ProblemSize problem;
    std::string precision;
    std::string device_name;

    // Throws Error if a component is empty.
    void validate() const;

    // `<kernel key>/<x>x<y>x<z>/<precision>/<device>`
    std::string label() const;

    static Scenario of(const TuningSession& session);

    friend bool operator==(const Scenario&, const Scenario&) = default;
};

// Objective of `config` in the session's scenario, or nullopt if it fails
// or cannot be measured.
using Evaluator = std::function<std::optional<double>(const TuningSession&, const Configuration&)>;

/**
 * Looks the configuration up in the session's evaluations; otherwise, for
 * sessions recorded with the simulated backend, re-measures it with the
 * executor rebuilt from the session header.
 */
std::optional<double> replay_objective(const TuningSession& session, const Configuration& config);

// best objective / objective of `config`. Throws Error if the session has
// no best or `config` has no successful measurement.
double fraction_of_optimum(
    const TuningSession& session,
    const Configuration& config,
    const Evaluator& evaluator = replay_objective);

struct EfficiencyMatrix {
    std::vector<Scenario> scenarios;
    // entries[i][j]: fraction of scenario j's optimum reached by the best
    // configuration of scenario i; absent if it failed in j.
    std::vector<std::vector<std::optional<double>>> entries;
};

// Efficiency of `config` in every session's scenario, capped at 1.
std::vector<std::optional<double>> efficiencies_of(
    const Configuration& config,
    std::span<const TuningSession> sessions,
    const Evaluator& evaluator = replay_objective);

// Sessions must share one search space and each have a best.
EfficiencyMatrix cross_matrix(std::span<const TuningSession> sessions, const Evaluator& evaluator = replay_objective);

struct PortabilityScore {
    double best = 0.0;
    double worst = 0.0;
    double ppm = 0.0;
};

/**
 * Harmonic mean of the efficiencies, or 0 if any is absent. Efficiencies
 * must lie in (0, 1]; throws Error for an empty list.
 */
PortabilityScore ppm(std::span<const std::optional<double>> efficiencies);

struct HistogramMarker {
    std::string label;
    std::optional<double> fraction;
};

struct Histogram {
    // Bin i covers [i / bins, (i + 1) / bins); the last bin includes 1.
    std::vector<std::size_t> counts;
    std::vector<HistogramMarker> markers;
};

// Fraction of optimum of every successful evaluation, binned, with markers
// for the default configuration and an optional reference configuration.
Histogram histogram(
    const TuningSession& session,
    std::size_t bins,
    const std::optional<Configuration>& reference = std::nullopt,
    const Evaluator& evaluator = replay_objective);

// `bin_low,bin_high,count,marker`; a marker row repeats its fraction in
// both bin columns and leaves count empty.
std::string histogram_csv(const Histogram& h);

struct MatrixRow {
    std::string label;
    std::vector<std::optional<double>> fractions;
};

// `row,column,fraction`, absent entries left empty. `extra_rows` follow the
// scenario rows under their own labels.
std::string matrix_csv(const EfficiencyMatrix& m, std::span<const MatrixRow> extra_rows = {});

// Groups `row,column,fraction` lines by row, in order of appearance.
std::vector<MatrixRow> parse_matrix_csv(std::string_view text);

struct PortabilityRow {
    std::string label;
    PortabilityScore score;
};

// `label,best,worst,ppm`
std::string ppm_csv(std::span<const PortabilityRow> rows);

}  // namespace tunekit
