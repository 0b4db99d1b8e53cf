#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "tunekit/value.h"

namespace tunekit {

enum struct UnaryOp { negate, logical_not };

enum struct BinaryOp {
    add,
    sub,
    mul,
    div,
    mod,
    eq,
    ne,
    lt,
    le,
    gt,
    ge,
    logical_and,
    logical_or,
};

enum struct Function { ceil_div, min, max };

const char* op_symbol(UnaryOp op);
const char* op_symbol(BinaryOp op);
const char* function_name(Function fn);

/**
 * Immutable expression tree used for restrictions, launch geometry,
 * preprocessor defines and template arguments.
 *
 * Nodes are shared, so copying an `Expr` is cheap and expressions can be
 * passed between threads freely.
 */
class Expr {
  public:
    struct Node;

    enum struct Kind { literal, identifier, unary, binary, call };

    // Integer literal 0.
    Expr();

    template<std::integral T>
        requires(!std::same_as<T, bool>)
    Expr(T v) : Expr(literal(Value(v))) {}

    static Expr literal(Value v);
    static Expr identifier(std::string name);
    static Expr unary(UnaryOp op, Expr operand);
    static Expr binary(BinaryOp op, Expr lhs, Expr rhs);
    static Expr call(Function fn, std::vector<Expr> args);

    Kind kind() const;

    // Accessors; each requires the matching kind().
    const Value& literal_value() const;
    const std::string& identifier_name() const;
    UnaryOp unary_op() const;
    BinaryOp binary_op() const;
    Function function() const;
    // Operand(s) of a unary, binary or call node.
    const std::vector<Expr>& operands() const;

    // Source text that parses back into a structurally equal tree.
    std::string to_string() const;

    void collect_identifiers(std::set<std::string>& out) const;
    std::set<std::string> identifiers() const;

    friend bool operator==(const Expr& a, const Expr& b);

  private:
    explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

    std::shared_ptr<const Node> node_;
};

Expr operator+(Expr a, Expr b);
Expr operator-(Expr a, Expr b);
Expr operator*(Expr a, Expr b);
Expr operator/(Expr a, Expr b);
Expr operator%(Expr a, Expr b);
Expr ceil_div(Expr a, Expr b);

std::ostream& operator<<(std::ostream& os, const Expr& e);

// Parses expression source. Throws ParseError carrying the byte offset.
Expr parse_expr(std::string_view text);

// Variable bindings visible to an expression.
class Env {
  public:
    virtual ~Env() = default;
    virtual const Value* find(std::string_view name) const = 0;
};

class MapEnv: public Env {
  public:
    MapEnv() = default;
    MapEnv(std::initializer_list<std::pair<const std::string, Value>> init) : vars_(init) {}

    void set(std::string name, Value v) {
        vars_.insert_or_assign(std::move(name), std::move(v));
    }

    const Value* find(std::string_view name) const override;

  private:
    std::map<std::string, Value, std::less<>> vars_;
};

// Looks names up in `first`, then in `second`.
class ChainEnv: public Env {
  public:
    ChainEnv(const Env& first, const Env& second) : first_(first), second_(second) {}

    const Value* find(std::string_view name) const override {
        const Value* v = first_.find(name);
        return v != nullptr ? v : second_.find(name);
    }

  private:
    const Env& first_;
    const Env& second_;
};

/**
 * Evaluates `e` under `env`.
 *
 * Integer arithmetic is checked 64-bit signed; division and modulo truncate
 * toward zero. `&&` and `||` short-circuit. Throws EvalError for unbound
 * identifiers, type mismatches, division by zero and overflow.
 */
Value evaluate(const Expr& e, const Env& env);

}  // namespace tunekit
