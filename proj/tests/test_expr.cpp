#include <catch_amalgamated.hpp>
#include <limits>

#include "tunekit/error.h"
#include "tunekit/expr.h"
#include "tunekit/rng.h"

using namespace tunekit;

namespace {

Expr id(const char* name) {
    return Expr::identifier(name);
}

Expr bin(BinaryOp op, Expr a, Expr b) {
    return Expr::binary(op, std::move(a), std::move(b));
}

Value eval(std::string_view text, const MapEnv& env = {}) {
    return evaluate(parse_expr(text), env);
}

// Random well-formed tree, any mix of types; only the structure matters.
Expr random_tree(SplitMix64& rng, int depth) {
    static const char* const names[] = {"a", "block_x", "problem_z", "arg3", "x_1"};
    static const char* const strings[] = {"", "XYZ", "say \"hi\"", "back\\slash", "tab\there\nnl"};

    std::uint64_t pick = depth <= 0 ? rng.below(4) : rng.below(9);
    switch (pick) {
        case 0: {
            auto v = static_cast<std::int64_t>(rng.below(2001)) - 1000;
            return Expr::literal(Value(v));
        }
        case 1:
            return Expr::literal(Value(rng.below(2) == 0));
        case 2:
            return Expr::literal(Value(std::string(strings[rng.below(5)])));
        case 3:
            return id(names[rng.below(5)]);
        case 4:
        case 5:
            return Expr::unary(rng.below(2) == 0 ? UnaryOp::negate : UnaryOp::logical_not, random_tree(rng, depth - 1));
        case 6: {
            auto fn = static_cast<Function>(rng.below(3));
            std::size_t n = fn == Function::ceil_div ? 2 : 2 + rng.below(3);
            std::vector<Expr> args;
            for (std::size_t i = 0; i < n; i++) {
                args.push_back(random_tree(rng, depth - 1));
            }
            return Expr::call(fn, std::move(args));
        }
        default: {
            auto op = static_cast<BinaryOp>(rng.below(13));
            return bin(op, random_tree(rng, depth - 1), random_tree(rng, depth - 1));
        }
    }
}

}  // namespace

TEST_CASE("precedence follows C", "[expr]") {
    CHECK(parse_expr("1 + 2 * 3") == bin(BinaryOp::add, Expr(1), bin(BinaryOp::mul, Expr(2), Expr(3))));

    CHECK(
        parse_expr("block_x * block_y * block_z <= 1024")
        == bin(
            BinaryOp::le,
            bin(BinaryOp::mul, bin(BinaryOp::mul, id("block_x"), id("block_y")), id("block_z")),
            Expr(1024)));

    CHECK(
        parse_expr("a || b && c") == bin(BinaryOp::logical_or, id("a"), bin(BinaryOp::logical_and, id("b"), id("c"))));
    CHECK(parse_expr("a - b - c") == bin(BinaryOp::sub, bin(BinaryOp::sub, id("a"), id("b")), id("c")));
    CHECK(parse_expr("(a - b) * c") == bin(BinaryOp::mul, bin(BinaryOp::sub, id("a"), id("b")), id("c")));
    CHECK(parse_expr("-a * b") == bin(BinaryOp::mul, Expr::unary(UnaryOp::negate, id("a")), id("b")));
    // Comparisons share one level and associate to the left.
    CHECK(parse_expr("a < b == c > d")
          == bin(BinaryOp::gt, bin(BinaryOp::eq, bin(BinaryOp::lt, id("a"), id("b")), id("c")), id("d")));
}

TEST_CASE("syntax errors carry a byte offset", "[expr]") {
    // The text is 27 bytes long; the missing parenthesis is detected at its end.
    std::string text = "ceil_div(problem_x, block_x";
    REQUIRE(text.size() == 27);
    try {
        parse_expr(text);
        FAIL("expected a syntax error");
    } catch (const ParseError& e) {
        CHECK(e.offset == 27);
    }

    try {
        parse_expr("1 + * 2");
        FAIL("expected a syntax error");
    } catch (const ParseError& e) {
        CHECK(e.offset == 4);
    }

    CHECK_THROWS_AS(parse_expr("floor(3)"), ParseError);
    CHECK_THROWS_AS(parse_expr(""), ParseError);
    CHECK_THROWS_AS(parse_expr("1 2"), ParseError);
    CHECK_THROWS_AS(parse_expr("\"open"), ParseError);
    CHECK_THROWS_AS(parse_expr("min(1)"), Error);
    CHECK_THROWS_AS(parse_expr("ceil_div(1, 2, 3)"), Error);
    CHECK_THROWS_AS(parse_expr("99999999999999999999"), ParseError);
}

TEST_CASE("evaluation semantics", "[expr]") {
    CHECK(eval("ceil_div(1000, 512)") == Value(2));
    CHECK(eval("block_x * tile_x", {{"block_x", 256}, {"tile_x", 2}}) == Value(512));

    CHECK(eval("7 / 2") == Value(3));
    CHECK(eval("-7 / 2") == Value(-3));
    CHECK(eval("-7 % 3") == Value(-1));
    CHECK(eval("7 % -3") == Value(1));
    CHECK(eval("min(4, -2, 9)") == Value(-2));
    CHECK(eval("max(4, -2, 9)") == Value(9));
    CHECK(eval("ceil_div(0, 5)") == Value(0));
    CHECK(eval("ceil_div(9223372036854775807, 2)") == Value(std::int64_t {4611686018427387904}));
    CHECK(eval("\"a\" != \"b\"") == Value(true));
    CHECK(eval("!(1 < 2)") == Value(false));

    // Short-circuit: the unbound right operand is never looked at.
    CHECK(eval("1 < 2 || nope") == Value(true));
    CHECK(eval("1 > 2 && nope") == Value(false));
}

TEST_CASE("string comparison against truth table", "[expr]") {
    Expr e = parse_expr("unravel == \"XYZ\" || tile_z > 1");
    for (const char* unravel : {"XYZ", "XZY", "ZYX"}) {
        for (std::int64_t tile_z : {1, 2, 4}) {
            MapEnv env {{"unravel", std::string(unravel)}, {"tile_z", tile_z}};
            bool expected = std::string(unravel) == "XYZ" || tile_z > 1;
            CHECK(evaluate(e, env) == Value(expected));
        }
    }
    CHECK(evaluate(e, MapEnv {{"unravel", std::string("ZYX")}, {"tile_z", 4}}) == Value(true));
}

TEST_CASE("evaluation errors", "[expr]") {
    CHECK_THROWS_AS(eval("x + 1"), EvalError);
    CHECK_THROWS_AS(eval("1 / 0"), EvalError);
    CHECK_THROWS_AS(eval("1 % 0"), EvalError);
    CHECK_THROWS_AS(eval("9223372036854775807 + 1"), EvalError);
    CHECK_THROWS_AS(eval("-9223372036854775807 - 2"), EvalError);
    CHECK_THROWS_AS(eval("4611686018427387904 * 2"), EvalError);
    CHECK_THROWS_AS(eval("ceil_div(-1, 2)"), EvalError);
    CHECK_THROWS_AS(eval("ceil_div(1, 0)"), EvalError);
    CHECK_THROWS_AS(eval("1 + true"), EvalError);
    CHECK_THROWS_AS(eval("true == true"), EvalError);
    CHECK_THROWS_AS(eval("\"a\" < \"b\""), EvalError);
    CHECK_THROWS_AS(eval("\"a\" == 1"), EvalError);
    CHECK_THROWS_AS(eval("!3"), EvalError);
    CHECK_THROWS_AS(eval("1 && true"), EvalError);
}

TEST_CASE("printing round-trips through the parser", "[expr]") {
    SplitMix64 rng(2024);
    for (int i = 0; i < 2000; i++) {
        Expr e = random_tree(rng, 5);
        std::string text = e.to_string();
        Expr back = parse_expr(text);
        INFO(text);
        REQUIRE(back == e);
        REQUIRE(back.to_string() == text);
    }

    CHECK(Expr::unary(UnaryOp::negate, Expr(5)).to_string() == "-(5)");
    CHECK(parse_expr("-5") == Expr(-5));
    CHECK(parse_expr("a - (b - c)").to_string() == "a - (b - c)");
    CHECK(parse_expr("(a - b) - c").to_string() == "a - b - c");
}

TEST_CASE("evaluation is pure", "[expr]") {
    SplitMix64 rng(7);
    MapEnv env {{"a", 3}, {"block_x", 64}, {"problem_z", 5}, {"arg3", -2}, {"x_1", 11}};
    int evaluated = 0;
    for (int i = 0; i < 2000; i++) {
        Expr e = random_tree(rng, 4);
        std::optional<Value> first;
        try {
            first = evaluate(e, env);
        } catch (const EvalError&) {
            CHECK_THROWS_AS(evaluate(e, env), EvalError);
            continue;
        }
        CHECK(evaluate(e, env) == *first);
        evaluated++;
    }
    CHECK(evaluated > 100);
}

TEST_CASE("identifiers are kept verbatim", "[expr]") {
    Expr e = parse_expr("ceil_div(problem_x, block_x * tile_x) + arg12");
    CHECK(e.identifiers() == std::set<std::string> {"problem_x", "block_x", "tile_x", "arg12"});
}
