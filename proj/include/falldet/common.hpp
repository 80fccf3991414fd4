#pragma once

#include <stdexcept>
#include <string>

namespace falldet {

// Bad user/config input (dimension mismatches, invalid enums, bad ranges).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed runtime input to an operation (wrong vector length, empty batch).
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Broken data files (missing columns, non-numeric fields, unknown labels).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem failures.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Model selection cannot proceed (e.g. every training point rejected).
class SelectionError : public std::runtime_error {
public:
    explicit SelectionError(const std::string& msg) : std::runtime_error(msg) {}
};

// A requested metric is undefined for the given counts.
class MetricError : public std::runtime_error {
public:
    explicit MetricError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace falldet
