#pragma once

#include <stdexcept>
#include <string>

namespace diffdac {

/// Incompatible dimensions between two objects.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A precondition on an argument does not hold.
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A domain invariant is violated (e.g. a negative dual entry).
class InvariantError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// NaN or infinity where a finite value is required.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An iterative method ran out of iterations.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double last_residual)
        : std::runtime_error(what + " (last residual " + std::to_string(last_residual) + ")"),
          residual_(last_residual) {}

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Invalid experiment configuration; `key_path` points at the offending entry.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key_path, const std::string& message)
        : std::runtime_error(key_path + ": " + message), key_path_(std::move(key_path)) {}

    const std::string& key_path() const noexcept { return key_path_; }

private:
    std::string key_path_;
};

} // namespace diffdac
