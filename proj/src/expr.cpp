#include "tunekit/expr.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <ostream>
#include <optional>
#include <variant>

#include "tunekit/error.h"

namespace tunekit {

struct Expr::Node {
    Kind kind;
    Value value;  // literal
    std::string name;  // identifier
    int op = 0;  // UnaryOp, BinaryOp or Function depending on kind
    std::vector<Expr> operands;
};

namespace {

// Binding strength; higher binds tighter.
int precedence(BinaryOp op) {
    switch (op) {
        case BinaryOp::logical_or:
            return 1;
        case BinaryOp::logical_and:
            return 2;
        case BinaryOp::eq:
        case BinaryOp::ne:
        case BinaryOp::lt:
        case BinaryOp::le:
        case BinaryOp::gt:
        case BinaryOp::ge:
            return 3;
        case BinaryOp::add:
        case BinaryOp::sub:
            return 4;
        case BinaryOp::mul:
        case BinaryOp::div:
        case BinaryOp::mod:
            return 5;
    }
    return 0;
}

constexpr int unary_precedence = 6;

int precedence_of(const Expr& e) {
    if (e.kind() == Expr::Kind::binary) {
        return precedence(e.binary_op());
    }
    if (e.kind() == Expr::Kind::unary) {
        return unary_precedence;
    }
    // Negative literals print with a leading minus.
    if (e.kind() == Expr::Kind::literal && e.literal_value().is_integer()
        && e.literal_value().as_integer() < 0) {
        return unary_precedence;
    }
    return unary_precedence + 1;
}

void print(const Expr& e, std::string& out);

void print_operand(const Expr& e, bool parenthesize, std::string& out) {
    if (parenthesize) {
        out += '(';
        print(e, out);
        out += ')';
    } else {
        print(e, out);
    }
}

void print(const Expr& e, std::string& out) {
    switch (e.kind()) {
        case Expr::Kind::literal:
            out += e.literal_value().to_source();
            break;
        case Expr::Kind::identifier:
            out += e.identifier_name();
            break;
        case Expr::Kind::unary: {
            const Expr& operand = e.operands()[0];
            out += op_symbol(e.unary_op());
            // `-5` would re-parse as a negative literal, `--x` as garbage.
            bool wrap = precedence_of(operand) <= unary_precedence
                || (e.unary_op() == UnaryOp::negate && operand.kind() == Expr::Kind::literal
                    && operand.literal_value().is_integer());
            print_operand(operand, wrap, out);
            break;
        }
        case Expr::Kind::binary: {
            int p = precedence(e.binary_op());
            const auto& ops = e.operands();
            print_operand(ops[0], precedence_of(ops[0]) < p, out);
            out += ' ';
            out += op_symbol(e.binary_op());
            out += ' ';
            print_operand(ops[1], precedence_of(ops[1]) <= p, out);
            break;
        }
        case Expr::Kind::call: {
            out += function_name(e.function());
            out += '(';
            bool first = true;
            for (const auto& arg : e.operands()) {
                if (!first) {
                    out += ", ";
                }
                first = false;
                print(arg, out);
            }
            out += ')';
            break;
        }
    }
}

class Parser {
  public:
    explicit Parser(std::string_view text) : text_(text) {}

    Expr parse() {
        Expr e = parse_binary(1);
        skip_space();
        if (pos_ != text_.size()) {
            throw ParseError(pos_, "unexpected character '" + std::string(1, text_[pos_]) + "'");
        }
        return e;
    }

  private:
    void skip_space() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            pos_++;
        }
    }

    bool consume(std::string_view token) {
        skip_space();
        if (text_.substr(pos_, token.size()) == token) {
            pos_ += token.size();
            return true;
        }
        return false;
    }

    void expect(std::string_view token) {
        if (!consume(token)) {
            throw ParseError(pos_, "expected '" + std::string(token) + "'");
        }
    }

    // Tries to match a binary operator of exactly precedence `level`.
    std::optional<BinaryOp> match_operator(int level) {
        skip_space();
        auto rest = text_.substr(pos_);
        auto starts = [&](std::string_view s) { return rest.substr(0, s.size()) == s; };

        std::optional<BinaryOp> op;
        std::size_t len = 1;

        if (starts("||")) {
            op = BinaryOp::logical_or, len = 2;
        } else if (starts("&&")) {
            op = BinaryOp::logical_and, len = 2;
        } else if (starts("==")) {
            op = BinaryOp::eq, len = 2;
        } else if (starts("!=")) {
            op = BinaryOp::ne, len = 2;
        } else if (starts("<=")) {
            op = BinaryOp::le, len = 2;
        } else if (starts(">=")) {
            op = BinaryOp::ge, len = 2;
        } else if (starts("<")) {
            op = BinaryOp::lt;
        } else if (starts(">")) {
            op = BinaryOp::gt;
        } else if (starts("+")) {
            op = BinaryOp::add;
        } else if (starts("-")) {
            op = BinaryOp::sub;
        } else if (starts("*")) {
            op = BinaryOp::mul;
        } else if (starts("/")) {
            op = BinaryOp::div;
        } else if (starts("%")) {
            op = BinaryOp::mod;
        }

        if (!op || precedence(*op) != level) {
            return std::nullopt;
        }

        pos_ += len;
        return op;
    }

    Expr parse_binary(int level) {
        if (level > 5) {
            return parse_unary();
        }

        Expr lhs = parse_binary(level + 1);
        while (auto op = match_operator(level)) {
            Expr rhs = parse_binary(level + 1);
            lhs = Expr::binary(*op, std::move(lhs), std::move(rhs));
        }
        return lhs;
    }

    Expr parse_unary() {
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == '!' && text_.substr(pos_, 2) != "!=") {
            pos_++;
            return Expr::unary(UnaryOp::logical_not, parse_unary());
        }

        if (consume("-")) {
            skip_space();
            if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                return parse_integer(true);
            }
            return Expr::unary(UnaryOp::negate, parse_unary());
        }

        return parse_primary();
    }

    Expr parse_integer(bool negative) {
        std::size_t start = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
            pos_++;
        }

        // Parse with the sign attached so that INT64_MIN is representable.
        std::string digits = (negative ? "-" : "") + std::string(text_.substr(start, pos_ - start));
        std::int64_t value = 0;
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
        if (ec != std::errc() || ptr != digits.data() + digits.size()) {
            throw ParseError(start, "integer literal out of range");
        }

        if (pos_ < text_.size() && is_ident_char(text_[pos_])) {
            throw ParseError(pos_, "invalid integer literal");
        }

        return Expr::literal(value);
    }

    static bool is_ident_start(char c) {
        return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
    }

    static bool is_ident_char(char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
    }

    Expr parse_string() {
        std::size_t start = pos_;
        pos_++;  // opening quote
        std::string out;

        while (true) {
            if (pos_ >= text_.size()) {
                throw ParseError(start, "unterminated string literal");
            }

            char c = text_[pos_++];
            if (c == '"') {
                break;
            }

            if (c == '\\') {
                if (pos_ >= text_.size()) {
                    throw ParseError(start, "unterminated string literal");
                }
                char esc = text_[pos_++];
                switch (esc) {
                    case '"':
                    case '\\':
                        out += esc;
                        break;
                    case 'n':
                        out += '\n';
                        break;
                    case 't':
                        out += '\t';
                        break;
                    default:
                        throw ParseError(pos_ - 1, "unknown escape sequence");
                }
            } else {
                out += c;
            }
        }

        return Expr::literal(std::move(out));
    }

    Expr parse_primary() {
        skip_space();
        if (pos_ >= text_.size()) {
            throw ParseError(pos_, "unexpected end of input");
        }

        char c = text_[pos_];

        if (c == '(') {
            pos_++;
            Expr inner = parse_binary(1);
            expect(")");
            return inner;
        }

        if (c == '"') {
            return parse_string();
        }

        if (std::isdigit(static_cast<unsigned char>(c))) {
            return parse_integer(false);
        }

        if (is_ident_start(c)) {
            std::size_t start = pos_;
            while (pos_ < text_.size() && is_ident_char(text_[pos_])) {
                pos_++;
            }
            std::string name(text_.substr(start, pos_ - start));

            if (name == "true") {
                return Expr::literal(true);
            }
            if (name == "false") {
                return Expr::literal(false);
            }

            skip_space();
            if (pos_ < text_.size() && text_[pos_] == '(') {
                return parse_call(name, start);
            }

            return Expr::identifier(std::move(name));
        }

        throw ParseError(pos_, "unexpected character '" + std::string(1, c) + "'");
    }

    Expr parse_call(const std::string& name, std::size_t name_offset) {
        Function fn;
        std::size_t min_args = 2;
        std::size_t max_args = SIZE_MAX;

        if (name == "ceil_div") {
            fn = Function::ceil_div;
            max_args = 2;
        } else if (name == "min") {
            fn = Function::min;
        } else if (name == "max") {
            fn = Function::max;
        } else {
            throw ParseError(name_offset, "unknown function '" + name + "'");
        }

        expect("(");
        std::vector<Expr> args;
        if (!consume(")")) {
            do {
                args.push_back(parse_binary(1));
            } while (consume(","));
            expect(")");
        }

        if (args.size() < min_args || args.size() > max_args) {
            throw ParseError(
                name_offset,
                "wrong number of arguments for '" + name + "': " + std::to_string(args.size()));
        }

        return Expr::call(fn, std::move(args));
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

void check_overflow(bool overflow, const char* what) {
    if (overflow) {
        throw EvalError(std::string("integer overflow in ") + what);
    }
}

Value eval_binary(BinaryOp op, const Value& a, const Value& b) {
    std::int64_t r = 0;

    switch (op) {
        case BinaryOp::add:
            check_overflow(__builtin_add_overflow(a.as_integer(), b.as_integer(), &r), "'+'");
            return r;
        case BinaryOp::sub:
            check_overflow(__builtin_sub_overflow(a.as_integer(), b.as_integer(), &r), "'-'");
            return r;
        case BinaryOp::mul:
            check_overflow(__builtin_mul_overflow(a.as_integer(), b.as_integer(), &r), "'*'");
            return r;
        case BinaryOp::div:
        case BinaryOp::mod: {
            std::int64_t x = a.as_integer();
            std::int64_t y = b.as_integer();
            if (y == 0) {
                throw EvalError(op == BinaryOp::div ? "division by zero" : "modulo by zero");
            }
            if (x == INT64_MIN && y == -1) {
                throw EvalError(std::string("integer overflow in '") + op_symbol(op) + "'");
            }
            return op == BinaryOp::div ? x / y : x % y;
        }
        case BinaryOp::eq:
        case BinaryOp::ne: {
            bool equal;
            if (a.is_integer() && b.is_integer()) {
                equal = a.as_integer() == b.as_integer();
            } else if (a.is_string() && b.is_string()) {
                equal = a.as_string() == b.as_string();
            } else {
                throw EvalError(
                    std::string("type mismatch: cannot compare ") + kind_name(a.kind())
                    + " with " + kind_name(b.kind()));
            }
            return op == BinaryOp::eq ? equal : !equal;
        }
        case BinaryOp::lt:
            return a.as_integer() < b.as_integer();
        case BinaryOp::le:
            return a.as_integer() <= b.as_integer();
        case BinaryOp::gt:
            return a.as_integer() > b.as_integer();
        case BinaryOp::ge:
            return a.as_integer() >= b.as_integer();
        case BinaryOp::logical_and:
        case BinaryOp::logical_or:
            break;  // handled by the caller
    }
    throw EvalError("invalid binary operator");
}

Value eval_call(Function fn, const std::vector<Expr>& args, const Env& env) {
    if (fn == Function::ceil_div) {
        std::int64_t a = evaluate(args[0], env).as_integer();
        std::int64_t b = evaluate(args[1], env).as_integer();
        if (a < 0 || b <= 0) {
            throw EvalError(
                "ceil_div requires a >= 0 and b > 0, got ceil_div(" + std::to_string(a) + ", "
                + std::to_string(b) + ")");
        }
        // Equal to (a + b - 1) / b without the intermediate overflow.
        return a / b + (a % b != 0 ? 1 : 0);
    }

    std::int64_t result = evaluate(args[0], env).as_integer();
    for (std::size_t i = 1; i < args.size(); i++) {
        std::int64_t v = evaluate(args[i], env).as_integer();
        result = fn == Function::min ? std::min(result, v) : std::max(result, v);
    }
    return result;
}

}  // namespace

const char* op_symbol(UnaryOp op) {
    return op == UnaryOp::negate ? "-" : "!";
}

const char* op_symbol(BinaryOp op) {
    switch (op) {
        case BinaryOp::add:
            return "+";
        case BinaryOp::sub:
            return "-";
        case BinaryOp::mul:
            return "*";
        case BinaryOp::div:
            return "/";
        case BinaryOp::mod:
            return "%";
        case BinaryOp::eq:
            return "==";
        case BinaryOp::ne:
            return "!=";
        case BinaryOp::lt:
            return "<";
        case BinaryOp::le:
            return "<=";
        case BinaryOp::gt:
            return ">";
        case BinaryOp::ge:
            return ">=";
        case BinaryOp::logical_and:
            return "&&";
        case BinaryOp::logical_or:
            return "||";
    }
    return "?";
}

const char* function_name(Function fn) {
    switch (fn) {
        case Function::ceil_div:
            return "ceil_div";
        case Function::min:
            return "min";
        case Function::max:
            return "max";
    }
    return "?";
}

Expr::Expr() : Expr(literal(std::int64_t {0})) {}

Expr Expr::literal(Value v) {
    return Expr(std::make_shared<const Node>(Node {Kind::literal, std::move(v), {}, 0, {}}));
}

Expr Expr::identifier(std::string name) {
    return Expr(std::make_shared<const Node>(Node {Kind::identifier, {}, std::move(name), 0, {}}));
}

Expr Expr::unary(UnaryOp op, Expr operand) {
    return Expr(std::make_shared<const Node>(
        Node {Kind::unary, {}, {}, static_cast<int>(op), {std::move(operand)}}));
}

Expr Expr::binary(BinaryOp op, Expr lhs, Expr rhs) {
    return Expr(std::make_shared<const Node>(
        Node {Kind::binary, {}, {}, static_cast<int>(op), {std::move(lhs), std::move(rhs)}}));
}

Expr Expr::call(Function fn, std::vector<Expr> args) {
    std::size_t expected_min = 2;
    if (args.size() < expected_min || (fn == Function::ceil_div && args.size() != 2)) {
        throw EvalError(
            std::string("wrong number of arguments for '") + function_name(fn) + "'");
    }
    return Expr(std::make_shared<const Node>(
        Node {Kind::call, {}, {}, static_cast<int>(fn), std::move(args)}));
}

Expr::Kind Expr::kind() const {
    return node_->kind;
}

const Value& Expr::literal_value() const {
    return node_->value;
}

const std::string& Expr::identifier_name() const {
    return node_->name;
}

UnaryOp Expr::unary_op() const {
    return static_cast<UnaryOp>(node_->op);
}

BinaryOp Expr::binary_op() const {
    return static_cast<BinaryOp>(node_->op);
}

Function Expr::function() const {
    return static_cast<Function>(node_->op);
}

const std::vector<Expr>& Expr::operands() const {
    return node_->operands;
}

std::string Expr::to_string() const {
    std::string out;
    print(*this, out);
    return out;
}

void Expr::collect_identifiers(std::set<std::string>& out) const {
    if (kind() == Kind::identifier) {
        out.insert(identifier_name());
    }
    for (const auto& child : operands()) {
        child.collect_identifiers(out);
    }
}

std::set<std::string> Expr::identifiers() const {
    std::set<std::string> out;
    collect_identifiers(out);
    return out;
}

bool operator==(const Expr& a, const Expr& b) {
    if (a.node_ == b.node_) {
        return true;
    }
    const auto& x = *a.node_;
    const auto& y = *b.node_;
    return x.kind == y.kind && x.value == y.value && x.name == y.name && x.op == y.op
        && x.operands == y.operands;
}

Expr operator+(Expr a, Expr b) {
    return Expr::binary(BinaryOp::add, std::move(a), std::move(b));
}

Expr operator-(Expr a, Expr b) {
    return Expr::binary(BinaryOp::sub, std::move(a), std::move(b));
}

Expr operator*(Expr a, Expr b) {
    return Expr::binary(BinaryOp::mul, std::move(a), std::move(b));
}

Expr operator/(Expr a, Expr b) {
    return Expr::binary(BinaryOp::div, std::move(a), std::move(b));
}

Expr operator%(Expr a, Expr b) {
    return Expr::binary(BinaryOp::mod, std::move(a), std::move(b));
}

Expr ceil_div(Expr a, Expr b) {
    return Expr::call(Function::ceil_div, {std::move(a), std::move(b)});
}

std::ostream& operator<<(std::ostream& os, const Expr& e) {
    return os << e.to_string();
}

Expr parse_expr(std::string_view text) {
    return Parser(text).parse();
}

const Value* MapEnv::find(std::string_view name) const {
    auto it = vars_.find(name);
    return it != vars_.end() ? &it->second : nullptr;
}

Value evaluate(const Expr& e, const Env& env) {
    switch (e.kind()) {
        case Expr::Kind::literal:
            return e.literal_value();

        case Expr::Kind::identifier: {
            const Value* v = env.find(e.identifier_name());
            if (v == nullptr) {
                throw EvalError("unbound identifier '" + e.identifier_name() + "'");
            }
            return *v;
        }

        case Expr::Kind::unary: {
            Value v = evaluate(e.operands()[0], env);
            if (e.unary_op() == UnaryOp::logical_not) {
                return !v.as_boolean();
            }
            std::int64_t x = v.as_integer();
            if (x == INT64_MIN) {
                throw EvalError("integer overflow in unary '-'");
            }
            return -x;
        }

        case Expr::Kind::binary: {
            BinaryOp op = e.binary_op();
            const auto& ops = e.operands();
            if (op == BinaryOp::logical_and || op == BinaryOp::logical_or) {
                bool lhs = evaluate(ops[0], env).as_boolean();
                if (op == BinaryOp::logical_and ? !lhs : lhs) {
                    return lhs;
                }
                return evaluate(ops[1], env).as_boolean();
            }
            return eval_binary(op, evaluate(ops[0], env), evaluate(ops[1], env));
        }

        case Expr::Kind::call:
            return eval_call(e.function(), e.operands(), env);
    }

    throw EvalError("invalid expression node");
}

}  // namespace tunekit
