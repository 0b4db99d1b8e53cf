#include <catch_amalgamated.hpp>
#include <cmath>

#include "support.h"
#include "tunekit/error.h"
#include "tunekit/fs.h"
#include "tunekit/rng.h"
#include "tunekit/wisdom.h"

using namespace tunekit;
using tunekit::test::TempDir;

namespace {

const DeviceIdent a100 {"Tesla A100", "Ampere", {}};
const DeviceIdent a4000 {"RTX A4000", "Ampere", {}};
const DeviceIdent v100 {"Tesla V100", "Volta", {}};

WisdomRecord record(const DeviceIdent& device, ProblemSize problem, std::int64_t block_x, double objective) {
    WisdomRecord r;
    r.device = device;
    r.problem = problem;
    r.config = Configuration {{"block_x", block_x}};
    r.objective_seconds = objective;
    r.provenance.date = "2024-05-01T12:00:00Z";
    r.provenance.hostname = "node" + std::to_string(block_x);
    r.provenance.software = {{"tunekit", "0.1.0"}};
    r.provenance.gpu = {{"name", device.name}};
    return r;
}

const Configuration fallback {{"block_x", 1}};

TuningSession session_for(const KernelDefinition& def, const DeviceIdent& device, ProblemSize problem, double best) {
    TuningSession s;
    s.kernel_name = def.name();
    s.kernel_key = def.kernel_key();
    s.device = device;
    s.problem = problem;
    s.precision = "float";
    s.definition = def.to_json();
    s.best = BestConfig {def.space().default_config().config, best};
    return s;
}

}  // namespace

TEST_CASE("merge keeps the best record per device and problem", "[wisdom]") {
    auto def = example_stencil_definition();
    WisdomFile file(def.kernel_key());
    CHECK(file.empty());

    file = append_result(file, session_for(def, a100, {256, 256, 256}, 1.0e-3));
    REQUIRE(file.records().size() == 1);

    file = append_result(file, session_for(def, a100, {256, 256, 256}, 0.8e-3));
    REQUIRE(file.records().size() == 1);
    CHECK(file.records()[0].objective_seconds == 0.8e-3);

    file = append_result(file, session_for(def, a100, {256, 256, 256}, 0.9e-3));
    REQUIRE(file.records().size() == 1);
    CHECK(file.records()[0].objective_seconds == 0.8e-3);

    file = append_result(file, session_for(def, a100, {512, 512, 512}, 2.0e-3));
    CHECK(file.records().size() == 2);

    file = append_result(file, session_for(def, v100, {256, 256, 256}, 3.0e-3));
    CHECK(file.records().size() == 3);

    const auto& r = file.records()[0];
    CHECK(r.provenance.software.at("tunekit") == software_version);
    CHECK(r.provenance.gpu.at("name") == "Tesla A100");
    CHECK_FALSE(r.provenance.hostname.empty());
    CHECK_FALSE(r.provenance.date.empty());
}

TEST_CASE("append_result rejects mismatched sessions", "[wisdom]") {
    auto def = example_stencil_definition();
    WisdomFile other(example_stencil_definition("diff_uvw").kernel_key());
    CHECK_THROWS_AS(append_result(other, session_for(def, a100, {8, 8, 8}, 1.0)), Error);

    WisdomFile file(def.kernel_key());
    auto no_best = session_for(def, a100, {8, 8, 8}, 1.0);
    no_best.best.reset();
    CHECK_THROWS_AS(append_result(file, no_best), Error);

    auto invalid = session_for(def, a100, {8, 8, 8}, 1.0);
    invalid.best->config.insert("block_x", Value(3));
    CHECK_THROWS_AS(append_result(file, invalid), Error);
}

TEST_CASE("stored objective is the minimum ever observed", "[wisdom]") {
    auto def = example_stencil_definition();
    SplitMix64 rng(17);
    std::map<std::pair<std::string, ProblemSize>, double> minimum;
    WisdomFile file(def.kernel_key());
    const DeviceIdent* devices[] = {&a100, &a4000, &v100};
    const ProblemSize problems[] = {{64, 64, 64}, {128, 128, 128}, {256, 256, 256}};

    for (int i = 0; i < 300; i++) {
        const DeviceIdent& d = *devices[rng.below(3)];
        ProblemSize p = problems[rng.below(3)];
        double objective = rng.uniform(0.1, 10.0);
        file = append_result(file, session_for(def, d, p, objective));
        auto key = std::make_pair(d.name, p);
        minimum[key] = minimum.count(key) ? std::min(minimum[key], objective) : objective;
    }

    CHECK(file.records().size() == minimum.size());
    for (const auto& r : file.records()) {
        CHECK(r.objective_seconds == minimum.at({r.device.name, r.problem}));
    }
}

TEST_CASE("selection cascade", "[wisdom]") {
    WisdomFile file("k");
    file.merge(record(a100, {256, 256, 256}, 256, 1.0));
    file.merge(record(a100, {512, 512, 512}, 512, 1.0));

    auto exact = select(file, a100, {256, 256, 256}, fallback);
    CHECK(exact.kind == MatchKind::exact);
    CHECK(exact.config.at("block_x") == Value(256));
    CHECK(exact.record == 0u);

    CHECK(problem_distance({300, 300, 300}, {256, 256, 256}) == Catch::Approx(76.2).margin(0.05));
    CHECK(problem_distance({300, 300, 300}, {512, 512, 512}) == Catch::Approx(367.2).margin(0.05));
    auto near = select(file, a100, {300, 300, 300}, fallback);
    CHECK(near.kind == MatchKind::same_device_nearest);
    CHECK(near.config.at("block_x") == Value(256));

    auto arch = select(file, a4000, {450, 450, 450}, fallback);
    CHECK(arch.kind == MatchKind::same_arch_nearest);
    CHECK(arch.config.at("block_x") == Value(512));

    auto any = select(file, v100, {1, 1, 1}, fallback);
    CHECK(any.kind == MatchKind::any_nearest);
    CHECK(any.config.at("block_x") == Value(256));

    auto none = select(WisdomFile("k"), a100, {256, 256, 256}, fallback);
    CHECK(none.kind == MatchKind::default_config);
    CHECK(none.config == fallback);
    CHECK_FALSE(none.record.has_value());
    CHECK(std::string(match_kind_name(MatchKind::default_config)) == "default");
}

TEST_CASE("an exact match dominates any other records", "[wisdom]") {
    SplitMix64 rng(3);
    for (int trial = 0; trial < 100; trial++) {
        WisdomFile file("k");
        const DeviceIdent* devices[] = {&a100, &a4000, &v100};
        for (int i = 0; i < 10; i++) {
            auto n = static_cast<std::int64_t>(1 + rng.below(4)) * 64;
            file.merge(record(*devices[rng.below(3)], {n, n, n}, 2 + i, rng.uniform(0.001, 1.0)));
        }
        ProblemSize target {128, 128, 128};
        file.merge(record(a100, target, 1000, 50.0));

        auto s = select(file, a100, target, fallback);
        REQUIRE(s.kind == MatchKind::exact);
        const auto& r = file.records()[*s.record];
        CHECK(r.device.name == a100.name);
        CHECK(r.problem == target);
    }
}

TEST_CASE("nearest selection matches a brute-force oracle", "[wisdom]") {
    SplitMix64 rng(5);
    for (int trial = 0; trial < 200; trial++) {
        WisdomFile file("k");
        for (int i = 0; i < 8; i++) {
            std::int64_t x = 1 + static_cast<std::int64_t>(rng.below(50));
            std::int64_t y = 1 + static_cast<std::int64_t>(rng.below(50));
            ProblemSize p = rng.below(4) == 0 ? ProblemSize {x, y} : ProblemSize {x, y, 7};
            file.merge(record(a100, p, 10 + i, 1.0 + static_cast<double>(rng.below(3))));
        }
        ProblemSize q {static_cast<std::int64_t>(1 + rng.below(50)), static_cast<std::int64_t>(1 + rng.below(50)), 7};
        auto s = select(file, a100, q, fallback);
        if (s.kind == MatchKind::exact) {
            continue;
        }
        REQUIRE(s.kind == MatchKind::same_device_nearest);

        std::size_t best = 0;
        auto key = [&](std::size_t i) {
            const auto& r = file.records()[i];
            double d = 0;
            for (std::size_t k = 0; k < 3; k++) {
                double a = k < r.problem.dims() ? static_cast<double>(r.problem[k]) : 1.0;
                double b = static_cast<double>(q[k]);
                d += (a - b) * (a - b);
            }
            return std::make_tuple(r.problem.dims() != q.dims(), std::sqrt(d), r.objective_seconds, i);
        };
        for (std::size_t i = 1; i < file.records().size(); i++) {
            if (key(i) < key(best)) {
                best = i;
            }
        }
        CHECK(*s.record == best);
    }
}

TEST_CASE("ties prefer the faster record, then file order", "[wisdom]") {
    WisdomFile file("k");
    file.merge(record(a100, {100}, 1, 2.0));
    file.merge(record(a100, {300}, 2, 1.0));
    file.merge(record(a100, {302}, 3, 1.0));
    file.merge(record(a100, {298}, 4, 1.0));
    CHECK(select(file, a100, {199}, fallback).config.at("block_x") == Value(4));
    CHECK(select(file, a100, {301}, fallback).config.at("block_x") == Value(2));
    CHECK(select(file, a100, {299}, fallback).config.at("block_x") == Value(2));
}

TEST_CASE("wisdom files round trip byte for byte", "[wisdom]") {
    TempDir dir;
    WisdomFile file("advec_u-0123456789abcdef");
    file.merge(record(a100, {256, 256, 256}, 256, 1.0e-3));
    file.merge(record(v100, {512, 512}, 128, 2.5e-3));
    WisdomRecord odd = record(a4000, {7}, 64, 0.1);
    odd.config.insert("unravel", Value("ZYX"));
    odd.config.insert("unroll_x", Value(true));
    odd.device.attributes = {{"memory", "16 GB"}, {"sm_count", "48"}};
    file.merge(odd);

    auto path = wisdom_file_name(dir.path(), file.kernel_key());
    CHECK(path.filename() == "advec_u-0123456789abcdef.wisdom");
    file.save(path);
    std::string bytes = read_file(path);
    WisdomFile back = WisdomFile::load(path);
    CHECK(back == file);
    back.save(dir / "again.wisdom");
    CHECK(read_file(dir / "again.wisdom") == bytes);

    auto first = bytes.substr(0, bytes.find('\n'));
    auto header = nlohmann::json::parse(first);
    CHECK(header.dump() == first);
    CHECK(header["kernel_key"] == file.kernel_key());
    CHECK(header["objective"] == "time");
    CHECK(header["format_version"] == 1);
    CHECK(bytes.back() == '\n');

    CHECK(WisdomFile::load_or_empty(dir / "missing.wisdom", "x").empty());
    CHECK_THROWS_AS(WisdomFile::parse("{\"format_version\":1}\n"), FormatError);
    CHECK_THROWS_AS(WisdomFile::parse(first + "\n{\"device\":3}\n"), FormatError);
    WisdomRecord bad = record(a100, {1}, 1, 1.0);
    auto bad_json = to_json(bad);
    bad_json["objective"] = 0.0;
    CHECK_THROWS_AS(record_from_json(bad_json), FormatError);
}
