#include "tunekit/example.h"

#include <map>

namespace tunekit {

namespace {

const char* const axes[] = {"x", "y", "z"};

void declare_params(KernelBuilder& b) {
    for (const char* a : axes) {
        std::string axis = a;
        if (axis == "x") {
            b.tune("block_x", {16, 32, 64, 128, 256}, 256);
        } else {
            b.tune("block_" + axis, {1, 2, 4, 8, 16}, 1);
        }
    }
    for (const char* a : axes) {
        b.tune(std::string("tile_") + a, {1, 2, 4}, 1);
    }
    for (const char* a : axes) {
        b.tune(std::string("unroll_") + a, {true, false}, false);
    }
    for (const char* a : axes) {
        b.tune(std::string("contiguous_") + a, {true, false}, false);
    }
    b.tune("unravel", {"XYZ", "XZY", "YXZ", "YZX", "ZXY", "ZYX"}, "XYZ");
    b.tune("min_blocks", {1, 2, 3, 4, 5, 6}, 1);
}

}  // namespace

ConfigSpace example_stencil_space(bool limit_threads) {
    return example_stencil_definition("advec_u", "float", limit_threads).space();
}

KernelDefinition example_stencil_definition(
    const std::string& name,
    const std::string& precision,
    bool limit_threads) {
    KernelBuilder b(name, KernelSource::file(name + ".cu"));
    declare_params(b);

    if (limit_threads) {
        b.restriction(parse_expr(max_threads_restriction));
    }

    auto id = [](const std::string& n) { return Expr::identifier(n); };

    b.problem_size(arg(0), arg(1), arg(2))
        .block_size(id("block_x"), id("block_y"), id("block_z"))
        .grid_size(
            ceil_div(problem(0), id("block_x") * id("tile_x")),
            ceil_div(problem(1), id("block_y") * id("tile_y")),
            ceil_div(problem(2), id("block_z") * id("tile_z")))
        .template_arg(Expr::literal(precision));

    // Declared in name order, the order a JSON definition reads them back in.
    std::map<std::string, Expr> defines;
    for (const char* a : axes) {
        std::string up = a == std::string("x") ? "X" : a == std::string("y") ? "Y" : "Z";
        defines.emplace("BLOCK_SIZE_" + up, id(std::string("block_") + a));
        defines.emplace("TILE_FACTOR_" + up, id(std::string("tile_") + a));
        defines.emplace("UNROLL_" + up, id(std::string("unroll_") + a));
        defines.emplace("TILE_CONTIGUOUS_" + up, id(std::string("contiguous_") + a));
    }
    defines.emplace("UNRAVEL_PERMUTATION", id("unravel"));
    defines.emplace("BLOCKS_PER_SM", id("min_blocks"));
    for (auto& [n, e] : defines) {
        b.define(n, e);
    }
    b.compiler_flag("-std=c++17");

    return b.build();
}

}  // namespace tunekit
