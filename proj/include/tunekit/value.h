#pragma once

#include <concepts>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>

#include "json.hpp"

namespace tunekit {

// A scalar value inside an expression or a configuration: integer, boolean
// or string. There is intentionally no floating point.
class Value {
  public:
    enum class Kind { integer, boolean, string };

    Value() : data_(std::int64_t {0}) {}

    template<std::integral T>
        requires(!std::same_as<T, bool>)
    Value(T v) : data_(static_cast<std::int64_t>(v)) {}

    Value(bool v) : data_(v) {}
    Value(std::string v) : data_(std::move(v)) {}
    Value(const char* v) : data_(std::string(v)) {}

    Kind kind() const {
        return static_cast<Kind>(data_.index());
    }

    bool is_integer() const {
        return kind() == Kind::integer;
    }

    bool is_boolean() const {
        return kind() == Kind::boolean;
    }

    bool is_string() const {
        return kind() == Kind::string;
    }

    // Throw EvalError on type mismatch.
    std::int64_t as_integer() const;
    bool as_boolean() const;
    const std::string& as_string() const;

    // Plain textual form: `256`, `true`, `XYZ`.
    std::string to_string() const;

    // Form used inside expression source: strings are quoted and escaped.
    std::string to_source() const;

    friend bool operator==(const Value&, const Value&) = default;
    friend auto operator<=>(const Value&, const Value&) = default;

  private:
    std::variant<std::int64_t, bool, std::string> data_;
};

const char* kind_name(Value::Kind kind);

std::ostream& operator<<(std::ostream& os, const Value& v);

nlohmann::json to_json(const Value& v);
Value value_from_json(const nlohmann::json& j);

}  // namespace tunekit
