#include <catch_amalgamated.hpp>

#include "tunekit/error.h"
#include "tunekit/example.h"
#include "tunekit/fs.h"
#include "tunekit/kerneldef.h"
#include "tunekit/rng.h"

using namespace tunekit;

namespace {

KernelDefinition vector_add() {
    KernelBuilder builder("vector_add", KernelSource::file("vector_add.cu"));
    auto bs = builder.tune("block_size", {32, 64, 128, 256, 1024});
    builder.problem_size(arg(3)).template_args(bs).block_size(bs);
    return builder.build();
}

KernelDefinition tiled_3d() {
    KernelBuilder b("tiled", KernelSource::inline_text("__global__ void tiled() {}"));
    auto bx = b.tune("block_x", {16, 32, 64});
    auto by = b.tune("block_y", {1, 2, 4});
    auto bz = b.tune("block_z", {1, 2});
    auto tx = b.tune("tile_x", {1, 2});
    auto ty = b.tune("tile_y", {1, 2, 4});
    auto tz = b.tune("tile_z", {1});
    b.problem_size(arg(0), arg(1), arg(2))
        .block_size(bx, by, bz)
        .grid_divisors(bx * tx, by, bz)
        .define("tile_total", tx * ty * tz)
        .define("BLOCK_X", bx)
        .compiler_flag("-O3");
    return b.build();
}

}  // namespace

TEST_CASE("problem size from arguments", "[kerneldef]") {
    CHECK(vector_add().derive_problem_size({{3, 10'000'000}}) == ProblemSize {10'000'000});
    CHECK(example_stencil_definition().derive_problem_size({{0, 256}, {1, 256}, {2, 256}}) == ProblemSize {256, 256, 256});
    CHECK_THROWS_AS(vector_add().derive_problem_size({{3, 0}}), EvalError);
    CHECK_THROWS_AS(vector_add().derive_problem_size({{2, 5}}), EvalError);
}

TEST_CASE("launch geometry", "[kerneldef]") {
    auto def = vector_add();
    auto g = def.derive_geometry({{"block_size", 256}}, ProblemSize {1000});
    CHECK(g.block == Dim3 {256, 1, 1});
    CHECK(g.grid == Dim3 {4, 1, 1});
    CHECK(g.shared_mem_bytes == 0);

    auto t = tiled_3d();
    Configuration c {{"block_x", 32}, {"block_y", 4}, {"block_z", 2}, {"tile_x", 2}, {"tile_y", 1}, {"tile_z", 1}};
    auto g3 = t.derive_geometry(c, ProblemSize {256, 256, 256});
    CHECK(g3.block == Dim3 {32, 4, 2});
    CHECK(g3.grid == Dim3 {4, 64, 128});

    KernelBuilder zero("zero", KernelSource::file("z.cu"));
    auto bs = zero.tune("bs", {0, 32});
    zero.problem_size(arg(0)).block_size(bs);
    auto zdef = zero.build();
    CHECK_THROWS_AS(zdef.derive_geometry({{"bs", 0}}, ProblemSize {100}), EvalError);
    CHECK_NOTHROW(zdef.derive_geometry({{"bs", 32}}, ProblemSize {100}));
}

TEST_CASE("example default geometry is (256,1,1)", "[kerneldef]") {
    auto def = example_stencil_definition();
    auto defaults = def.space().default_config().config;
    for (ProblemSize p : {ProblemSize {1, 1, 1}, ProblemSize {256, 256, 256}, ProblemSize {1000, 7, 3}}) {
        CHECK(def.derive_geometry(defaults, p).block == Dim3 {256, 1, 1});
    }
}

TEST_CASE("default grid covers the problem", "[kerneldef]") {
    KernelBuilder b("cover", KernelSource::file("c.cu"));
    auto bx = b.tune("bx", {1, 3, 32, 100, 256});
    auto by = b.tune("by", {1, 2, 7});
    b.problem_size(arg(0), arg(1)).block_size(bx, by);
    auto def = b.build();

    SplitMix64 rng(5);
    for (int i = 0; i < 500; i++) {
        std::int64_t px = 1 + static_cast<std::int64_t>(rng.below(5000));
        std::int64_t py = 1 + static_cast<std::int64_t>(rng.below(300));
        for (const auto& c : def.space().sample_random(rng.next(), 1)) {
            auto g = def.derive_geometry(c, ProblemSize {px, py});
            CHECK(g.grid.x * g.block.x >= px);
            CHECK((g.grid.x - 1) * g.block.x < px);
            CHECK(g.grid.y * g.block.y >= py);
            CHECK((g.grid.y - 1) * g.block.y < py);
            CHECK(g.grid.z == 1);
        }
    }
}

TEST_CASE("compile requests", "[kerneldef]") {
    auto req = vector_add().render_compile_request({{"block_size", 128}});
    CHECK(req.entry_name == "vector_add<128>");
    CHECK(req.defines.empty());

    KernelBuilder plain("plain", KernelSource::file("p.cu"));
    plain.tune("x", {1});
    plain.problem_size(arg(0));
    auto preq = plain.build().render_compile_request({{"x", 1}});
    CHECK(preq.entry_name == "plain");
    CHECK(preq.defines.empty());
    CHECK(preq.flags.empty());

    auto t = tiled_3d();
    Configuration c {{"block_x", 64}, {"block_y", 4}, {"block_z", 1}, {"tile_x", 2}, {"tile_y", 4}, {"tile_z", 1}};
    auto treq = t.render_compile_request(c);
    CHECK(treq.defines == std::vector<std::string> {"-D tile_total=8", "-D BLOCK_X=64"});
    CHECK(treq.flags == std::vector<std::string> {"-O3"});
    CHECK(treq.config == c);

    auto ex = example_stencil_definition("advec_u", "double");
    auto ereq = ex.render_compile_request(ex.space().default_config().config);
    CHECK(ereq.entry_name == "advec_u<double>");
    CHECK(std::find(ereq.defines.begin(), ereq.defines.end(), "-D UNRAVEL_PERMUTATION=XYZ") != ereq.defines.end());
    CHECK(std::find(ereq.defines.begin(), ereq.defines.end(), "-D UNROLL_X=false") != ereq.defines.end());
}

TEST_CASE("definitions are validated", "[kerneldef]") {
    {
        KernelBuilder b("bad", KernelSource::file("b.cu"));
        auto x = b.tune("x", {1, 2});
        b.problem_size(x);
        CHECK_THROWS_AS(b.build(), DefinitionError);
    }
    {
        KernelBuilder b("bad", KernelSource::file("b.cu"));
        b.tune("x", {1, 2});
        b.problem_size(arg(0)).block_size(Expr::identifier("y"));
        CHECK_THROWS_AS(b.build(), DefinitionError);
    }
    {
        KernelBuilder b("bad", KernelSource::file("b.cu"));
        b.tune("x", {1, 2});
        b.problem_size(arg(0)).define("N", arg(0));
        CHECK_THROWS_AS(b.build(), DefinitionError);
    }
    {
        KernelBuilder b("bad", KernelSource::file("b.cu"));
        b.tune("arg1", {1, 2});
        b.problem_size(arg(0));
        CHECK_THROWS_AS(b.build(), DefinitionError);
    }
    {
        KernelBuilder b("bad", KernelSource::file("b.cu"));
        b.tune("x", {1, 1});
        b.problem_size(arg(0));
        CHECK_THROWS_AS(b.build(), DefinitionError);
    }
}

TEST_CASE("definition JSON", "[kerneldef]") {
    for (const auto& def : {vector_add(), tiled_3d(), example_stencil_definition("diff_uvw", "float", true)}) {
        auto j = def.to_json();
        auto back = KernelDefinition::from_json(j);
        CHECK(back.to_json() == j);
        CHECK(canonical_json(back.to_json()) == canonical_json(j));
        CHECK(back.kernel_key() == def.kernel_key());
        CHECK(back.space() == def.space());
    }

    CHECK(KernelDefinition::from_json(example_stencil_definition().to_json()) == example_stencil_definition());
    CHECK_THROWS_AS(KernelDefinition::from_json(nlohmann::json::array()), FormatError);
    CHECK_THROWS_AS(
        KernelDefinition::from_json({{"name", "x"}, {"problem_size", {"arg0 +"}}}),
        FormatError);
}

TEST_CASE("kernel key tracks the tuned space", "[kerneldef]") {
    auto a = example_stencil_definition("advec_u", "float");
    CHECK(a.kernel_key() == example_stencil_definition("advec_u", "float").kernel_key());
    CHECK(a.kernel_key() != example_stencil_definition("advec_u", "double").kernel_key());
    CHECK(a.kernel_key() != example_stencil_definition("advec_u", "float", true).kernel_key());
    CHECK(a.kernel_key().rfind("advec_u-", 0) == 0);
}
