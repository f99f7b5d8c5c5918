// error.hpp - exception types shared by every chainmapper module

#pragma once

#include <stdexcept>
#include <string>

namespace chainmapper {

// Invalid input parameters (construction-time validation, preconditions).
class ParameterError : public std::invalid_argument {
public:
    explicit ParameterError(const std::string& what) : std::invalid_argument(what) {}
};

// Input is valid but lies outside the domain of a mathematical operation
// (nonpositive values in a log fit, divergent integral, ...).
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

// A numerical procedure failed to reach its accuracy target.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Configuration file problems. `path` names the offending key, e.g. "dynamics.delta".
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string path, const std::string& what)
        : std::runtime_error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace chainmapper
