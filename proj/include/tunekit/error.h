#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tunekit {

// Base class of every error raised by the library.
struct Error: std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError: Error {
    ParseError(std::size_t offset, const std::string& message) :
        Error("syntax error at offset " + std::to_string(offset) + ": " + message),
        offset(offset) {}

    std::size_t offset;
};

struct EvalError: Error {
    using Error::Error;
};

struct SpaceError: Error {
    using Error::Error;
};

struct DefinitionError: Error {
    using Error::Error;
};

// Malformed or corrupted files (captures, wisdom, sessions).
struct FormatError: Error {
    using Error::Error;
};

struct IoError: Error {
    using Error::Error;
};

}  // namespace tunekit
