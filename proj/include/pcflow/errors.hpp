#pragma once

#include <stdexcept>
#include <string>

namespace pcflow {

// Error categories map onto CLI exit codes (see tools/pcflow.cpp):
// ConfigError -> 2, NumericError -> 3, IoError -> 4. ArgumentError is a
// caller bug and surfaces as a config error when it escapes to the CLI.

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public IoError {
public:
    ParseError(const std::string& what, std::size_t line)
        : IoError(what + " (line " + std::to_string(line) + ")"), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace pcflow
