#pragma once

#include <stdexcept>
#include <string>

namespace dependasim {

// Invalid user-supplied configuration or input data. The CLI maps this to exit 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed trace/table file. Carries the 1-based line number when known.
class FormatError : public ConfigError {
public:
    FormatError(const std::string& what, std::size_t line)
        : ConfigError(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

// Filesystem or other environment failure. The CLI maps this to exit 3.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dependasim
