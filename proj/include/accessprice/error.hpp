#pragma once

#include <stdexcept>
#include <string>

namespace accessprice {

/// Base class for every error raised by the library.
class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of a model function (negative queue
/// length, division by a vanishing admission rate, ...).
class DomainError : public ModelError {
public:
    using ModelError::ModelError;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public ModelError {
public:
    using ModelError::ModelError;
};

/// An evaluation point sits on (or within the kink radius of) a point where
/// a piecewise model function is not differentiable.
class DegenerateConfiguration : public ModelError {
public:
    using ModelError::ModelError;
};

class CalibrationError : public ModelError {
public:
    using ModelError::ModelError;
};

class IntegrationError : public ModelError {
public:
    using ModelError::ModelError;
};

/// Configuration parse or schema failure; carries the offending key path.
class ConfigError : public ModelError {
public:
    ConfigError(std::string key_path, const std::string& what)
        : ModelError(key_path.empty() ? what : key_path + ": " + what),
          key_path_(std::move(key_path)) {}

    const std::string& key_path() const noexcept { return key_path_; }

private:
    std::string key_path_;
};

} // namespace accessprice
