#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace broadrefine {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid schema or run configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed or inconsistent input data (duplicate ids, unreadable files).
class DataError : public Error {
public:
    using Error::Error;
};

// Violated call contract (shape mismatch, precondition).
class ContractError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t position)
        : Error(message + " (at offset " + std::to_string(position) + ")"),
          position_(position) {}

    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

}  // namespace broadrefine
