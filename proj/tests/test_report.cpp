#include <catch_amalgamated.hpp>
#include <cmath>
#include <deque>
#include <numeric>

#include "support.h"
#include "tunekit/error.h"
#include "tunekit/report.h"
#include "tunekit/rng.h"

using namespace tunekit;

namespace {

// Small space so sessions can be exhaustive.
KernelDefinition small_kernel() {
    KernelBuilder b("small", KernelSource::inline_text("__global__ void small() {}"));
    b.tune("a", {1, 2, 3, 4, 5}, 3);
    b.tune("b", {10, 20, 30, 40});
    b.tune("c", {true, false});
    b.problem_size(arg(0), arg(1), arg(2));
    return b.build();
}

TuningSession sim_session(
    const KernelDefinition& def,
    std::uint64_t model_seed,
    ProblemSize problem,
    const std::string& device,
    Strategy strategy = Strategy::exhaustive,
    std::size_t max_evaluations = 1000) {
    auto space = std::make_shared<const ConfigSpace>(def.space());
    SimExecutor executor({device, "sim", {}}, std::make_shared<SimCostModel>(space, model_seed));
    Capture capture = test::small_capture(def, problem[0], problem[1], problem[2]);
    return tune(capture, *space, strategy, Budget {max_evaluations, std::nullopt}, executor, 7);
}

// Session with given objectives per configuration of a one-parameter space.
TuningSession synthetic_session(const std::vector<std::optional<double>>& objectives) {
    KernelBuilder b("synthetic", KernelSource::inline_text(""));
    std::vector<Value> values;
    for (std::size_t i = 0; i < objectives.size(); i++) {
        values.emplace_back(static_cast<std::int64_t>(i));
    }
    b.tune("i", values);
    b.problem_size(arg(0));
    auto def = b.build();

    TuningSession s;
    s.kernel_name = def.name();
    s.kernel_key = def.kernel_key();
    s.device = {"Dev", "arch", {}};
    s.problem = {100};
    s.precision = "float";
    s.definition = def.to_json();
    s.executor = {{"backend", "fake"}};
    for (std::size_t i = 0; i < objectives.size(); i++) {
        Measurement m = objectives[i] ? Measurement::success(*objectives[i])
                                      : Measurement::failure(MeasurementStatus::launch_failed);
        Configuration c {{"i", static_cast<std::int64_t>(i)}};
        s.evaluations.push_back({c, m, static_cast<double>(i + 1)});
        if (objectives[i] && (!s.best || *objectives[i] < s.best->objective)) {
            s.best = BestConfig {c, *objectives[i]};
        }
    }
    return s;
}

}  // namespace

TEST_CASE("fraction of optimum", "[report]") {
    auto s = synthetic_session({1.0e-3, 1.25e-3, std::nullopt, 2.0e-3});
    CHECK(fraction_of_optimum(s, Configuration {{"i", 0}}) == 1.0);
    CHECK(fraction_of_optimum(s, Configuration {{"i", 1}}) == Catch::Approx(0.8).epsilon(1e-12));
    CHECK(fraction_of_optimum(s, Configuration {{"i", 3}}) == 0.5);
    CHECK_THROWS_AS(fraction_of_optimum(s, Configuration {{"i", 2}}), Error);
    CHECK_THROWS_AS(fraction_of_optimum(s, Configuration {{"i", 9}}), Error);

    auto failed = synthetic_session({std::nullopt});
    CHECK_THROWS_AS(fraction_of_optimum(failed, Configuration {{"i", 0}}), Error);
}

TEST_CASE("replayed objectives for simulated sessions", "[report]") {
    auto def = small_kernel();
    auto s = sim_session(def, 3, {64, 64, 64}, "SimGPU", Strategy::random, 5);
    REQUIRE(s.evaluations.size() == 5);

    // Unevaluated configurations are re-measured with the recorded model.
    auto space = std::make_shared<const ConfigSpace>(def.space());
    SimCostModel model(space, 3);
    Enumerator e = space->enumerate();
    while (auto c = e.next()) {
        auto replayed = replay_objective(s, *c);
        REQUIRE(replayed.has_value());
        CHECK(*replayed == Catch::Approx(*model.measure(*c).objective * 1e-3).epsilon(1e-12));
    }
    CHECK_FALSE(replay_objective(s, Configuration {{"a", 9}, {"b", 10}, {"c", true}}).has_value());
    CHECK_FALSE(replay_objective(synthetic_session({1.0}), Configuration {{"i", 5}}).has_value());
}

TEST_CASE("identical models give an all-ones matrix", "[report]") {
    auto def = small_kernel();
    std::vector<TuningSession> sessions {
        sim_session(def, 5, {64, 64, 64}, "GPU-A"),
        sim_session(def, 5, {128, 128, 128}, "GPU-B"),
    };
    auto m = cross_matrix(sessions);
    REQUIRE(m.entries.size() == 2);
    for (const auto& row : m.entries) {
        for (const auto& e : row) {
            CHECK(e == 1.0);
        }
    }
    CHECK(m.scenarios[1].label() == sessions[1].kernel_key + "/128x128x128/float/GPU-B");
}

TEST_CASE("cross matrix matches an exhaustive oracle", "[report]") {
    auto def = small_kernel();
    auto space = std::make_shared<const ConfigSpace>(def.space());
    std::vector<std::uint64_t> seeds {1, 2, 3, 4};
    std::vector<TuningSession> sessions;
    for (auto seed : seeds) {
        sessions.push_back(sim_session(def, seed, {32, 32, 32}, "GPU" + std::to_string(seed)));
    }
    auto m = cross_matrix(sessions);

    // Independent computation: optimum and argmin per model by enumeration.
    std::deque<SimCostModel> models;
    std::vector<Configuration> argmin;
    std::vector<double> optimum;
    for (auto seed : seeds) {
        models.emplace_back(space, seed);
        double best = INFINITY;
        Configuration best_config;
        Enumerator e = space->enumerate();
        while (auto c = e.next()) {
            double v = *models.back().measure(*c).objective;
            if (v < best) {
                best = v;
                best_config = *c;
            }
        }
        optimum.push_back(best);
        argmin.push_back(best_config);
    }

    bool some_below_one = false;
    for (std::size_t i = 0; i < seeds.size(); i++) {
        CHECK(m.entries[i][i] == 1.0);
        for (std::size_t j = 0; j < seeds.size(); j++) {
            if (i == j) {
                continue;
            }
            double expected = optimum[j] / *models[j].measure(argmin[i]).objective;
            REQUIRE(m.entries[i][j].has_value());
            CHECK(*m.entries[i][j] == Catch::Approx(expected).epsilon(1e-9));
            some_below_one = some_below_one || *m.entries[i][j] < 1.0;
        }
    }
    CHECK(some_below_one);

    std::vector<TuningSession> mixed {sessions[0], sim_session(example_stencil_definition(), 1, {8, 8, 8}, "X", Strategy::random, 3)};
    CHECK_THROWS_AS(cross_matrix(mixed), Error);
}

TEST_CASE("failed cross evaluations are absent", "[report]") {
    auto a = synthetic_session({1.0, 2.0, 4.0});
    auto b = synthetic_session({std::nullopt, 1.0, 3.0});
    b.device.name = "Other";
    std::vector<TuningSession> sessions {a, b};
    auto m = cross_matrix(sessions);
    CHECK_FALSE(m.entries[0][1].has_value());
    CHECK(m.entries[1][0] == 0.5);
    CHECK(m.entries[0][0] == 1.0);
    CHECK(m.entries[1][1] == 1.0);
}

TEST_CASE("performance portability examples", "[report]") {
    std::vector<std::optional<double>> ones {1.0, 1.0, 1.0};
    CHECK(ppm(ones).ppm == 1.0);

    std::vector<std::optional<double>> half {0.5, 1.0};
    auto h = ppm(half);
    CHECK(h.ppm == Catch::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(h.best == 1.0);
    CHECK(h.worst == 0.5);

    std::vector<std::optional<double>> unsupported {0.9, std::nullopt};
    auto u = ppm(unsupported);
    CHECK(u.ppm == 0.0);
    CHECK(u.worst == 0.0);
    CHECK(u.best == 0.9);

    CHECK_THROWS_AS(ppm(std::span<const std::optional<double>> {}), Error);
    std::vector<std::optional<double>> out_of_range {1.5};
    CHECK_THROWS_AS(ppm(out_of_range), Error);
    std::vector<std::optional<double>> zero {0.0};
    CHECK_THROWS_AS(ppm(zero), Error);
}

TEST_CASE("ppm lies between worst and best and below the mean", "[report]") {
    SplitMix64 rng(99);
    for (int trial = 0; trial < 1000; trial++) {
        std::size_t n = 1 + rng.below(12);
        std::vector<std::optional<double>> e;
        for (std::size_t i = 0; i < n; i++) {
            e.push_back(1.0 - rng.uniform() * 0.999);
        }
        auto score = ppm(e);
        double lo = 1, hi = 0, sum = 0, reciprocal = 0;
        for (const auto& v : e) {
            lo = std::min(lo, *v);
            hi = std::max(hi, *v);
            sum += *v;
            reciprocal += 1 / *v;
        }
        CHECK(score.worst == lo);
        CHECK(score.best == hi);
        CHECK(score.ppm == Catch::Approx(static_cast<double>(n) / reciprocal).epsilon(1e-12));
        CHECK(score.ppm >= lo - 1e-12);
        CHECK(score.ppm <= hi + 1e-12);
        CHECK(score.ppm <= sum / static_cast<double>(n) + 1e-12);
    }
}

TEST_CASE("histogram binning", "[report]") {
    SECTION("single evaluation") {
        auto s = synthetic_session({2.0});
        auto h = histogram(s, 10);
        CHECK(std::accumulate(h.counts.begin(), h.counts.end(), std::size_t {0}) == 1);
        CHECK(h.counts[9] == 1);
        REQUIRE(h.markers.size() == 1);
        CHECK(h.markers[0].label == "default");
        CHECK(h.markers[0].fraction == 1.0);
    }
    SECTION("synthetic objectives against an independent binning") {
        SplitMix64 rng(4);
        std::vector<std::optional<double>> objectives;
        for (int i = 0; i < 500; i++) {
            objectives.push_back(rng.below(10) == 0 ? std::nullopt : std::optional(1.0 + rng.uniform() * 9.0));
        }
        auto s = synthetic_session(objectives);
        for (std::size_t bins : {1u, 7u, 20u}) {
            auto h = histogram(s, bins, Configuration {{"i", 3}});
            std::vector<std::size_t> expected(bins, 0);
            std::size_t ok = 0;
            for (const auto& o : objectives) {
                if (!o) {
                    continue;
                }
                ok++;
                double f = s.best->objective / *o;
                std::size_t k = 0;
                while (k + 1 < bins && f >= static_cast<double>(k + 1) / static_cast<double>(bins)) {
                    k++;
                }
                expected[k]++;
            }
            CHECK(h.counts == expected);
            CHECK(std::accumulate(h.counts.begin(), h.counts.end(), std::size_t {0}) == ok);
            REQUIRE(h.markers.size() == 2);
            CHECK(h.markers[1].label == "reference");
        }
    }
    SECTION("errors") {
        TuningSession empty = synthetic_session({1.0});
        empty.evaluations.clear();
        CHECK_THROWS_AS(histogram(empty, 10), Error);
        CHECK_THROWS_AS(histogram(synthetic_session({1.0}), 0), Error);
    }
}

TEST_CASE("the default configuration falls short of the optimum", "[report]") {
    auto def = example_stencil_definition();
    int below = 0;
    for (std::uint64_t seed = 1; seed <= 5; seed++) {
        auto s = sim_session(def, seed, {256, 256, 256}, "SimGPU", Strategy::random, 200);
        auto h = histogram(s, 20);
        REQUIRE(h.markers[0].fraction.has_value());
        below += *h.markers[0].fraction < 1.0 ? 1 : 0;
    }
    CHECK(below == 5);
}

TEST_CASE("CSV output", "[report]") {
    auto s = synthetic_session({1.0, 2.0, 4.0});
    auto h = histogram(s, 4, Configuration {{"i", 1}});
    CHECK(
        histogram_csv(h)
        == "bin_low,bin_high,count,marker\n"
           "0.0000,0.2500,0,\n"
           "0.2500,0.5000,1,\n"
           "0.5000,0.7500,1,\n"
           "0.7500,1.0000,1,\n"
           "1.0000,1.0000,,default\n"
           "0.5000,0.5000,,reference\n");

    auto b = synthetic_session({std::nullopt, 1.0, 3.0});
    b.device.name = "Other, Inc";
    std::vector<TuningSession> sessions {s, b};
    auto m = cross_matrix(sessions);
    std::vector<MatrixRow> extra {{"default", {1.0, std::nullopt}}};
    std::string csv = matrix_csv(m, extra);
    CHECK(csv.rfind("row,column,fraction\n", 0) == 0);
    CHECK(csv.find("\"" + m.scenarios[1].label() + "\"") != std::string::npos);

    auto rows = parse_matrix_csv(csv);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].label == m.scenarios[0].label());
    CHECK(rows[1].label == m.scenarios[1].label());
    CHECK(rows[0].fractions == m.entries[0]);
    CHECK(rows[1].fractions[0] == Catch::Approx(*m.entries[1][0]).epsilon(1e-6));
    CHECK(rows[2].label == "default");
    CHECK_FALSE(rows[2].fractions[1].has_value());
    CHECK_THROWS_AS(parse_matrix_csv("a,b\n"), FormatError);

    std::vector<PortabilityRow> ppm_rows {{"advec_u", {1.0, 0.5, 2.0 / 3.0}}};
    CHECK(ppm_csv(ppm_rows) == "label,best,worst,ppm\nadvec_u,1.0000,0.5000,0.6667\n");
}

TEST_CASE("scenario labels", "[report]") {
    Scenario s {"advec_u-00ff", {256, 256, 256}, "double", "A100"};
    CHECK(s.label() == "advec_u-00ff/256x256x256/double/A100");
    CHECK_NOTHROW(s.validate());
    s.precision = "";
    CHECK_THROWS_AS(s.validate(), Error);
}
