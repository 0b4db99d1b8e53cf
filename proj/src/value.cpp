#include "tunekit/value.h"

#include <ostream>

#include "tunekit/error.h"

namespace tunekit {

const char* kind_name(Value::Kind kind) {
    switch (kind) {
        case Value::Kind::integer:
            return "integer";
        case Value::Kind::boolean:
            return "boolean";
        case Value::Kind::string:
            return "string";
    }
    return "unknown";
}

std::int64_t Value::as_integer() const {
    if (const auto* v = std::get_if<std::int64_t>(&data_)) {
        return *v;
    }
    throw EvalError(
        std::string("type mismatch: expected integer, found ") + kind_name(kind()));
}

bool Value::as_boolean() const {
    if (const auto* v = std::get_if<bool>(&data_)) {
        return *v;
    }
    throw EvalError(
        std::string("type mismatch: expected boolean, found ") + kind_name(kind()));
}

const std::string& Value::as_string() const {
    if (const auto* v = std::get_if<std::string>(&data_)) {
        return *v;
    }
    throw EvalError(
        std::string("type mismatch: expected string, found ") + kind_name(kind()));
}

std::string Value::to_string() const {
    switch (kind()) {
        case Kind::integer:
            return std::to_string(std::get<std::int64_t>(data_));
        case Kind::boolean:
            return std::get<bool>(data_) ? "true" : "false";
        case Kind::string:
            return std::get<std::string>(data_);
    }
    return {};
}

std::string Value::to_source() const {
    if (!is_string()) {
        return to_string();
    }

    std::string out = "\"";
    for (char c : std::get<std::string>(data_)) {
        switch (c) {
            case '"':
                out += "\\\"";
                break;
            case '\\':
                out += "\\\\";
                break;
            case '\n':
                out += "\\n";
                break;
            case '\t':
                out += "\\t";
                break;
            default:
                out += c;
        }
    }
    out += '"';
    return out;
}

std::ostream& operator<<(std::ostream& os, const Value& v) {
    return os << v.to_string();
}

nlohmann::json to_json(const Value& v) {
    switch (v.kind()) {
        case Value::Kind::integer:
            return v.as_integer();
        case Value::Kind::boolean:
            return v.as_boolean();
        case Value::Kind::string:
            return v.as_string();
    }
    return nullptr;
}

Value value_from_json(const nlohmann::json& j) {
    if (j.is_boolean()) {
        return j.get<bool>();
    }
    if (j.is_number_unsigned()) {
        auto u = j.get<std::uint64_t>();
        if (u > static_cast<std::uint64_t>(INT64_MAX)) {
            throw FormatError("integer value out of range: " + j.dump());
        }
        return static_cast<std::int64_t>(u);
    }
    if (j.is_number_integer()) {
        return j.get<std::int64_t>();
    }
    if (j.is_string()) {
        return j.get<std::string>();
    }
    throw FormatError("expected integer, boolean or string value, found " + j.dump());
}

}  // namespace tunekit
