#pragma once

#include <stdexcept>
#include <string>

namespace greendc {

// Base for every error the library raises. The CLI maps ConfigError to
// exit code 1 and InvariantViolation to exit code 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// A parameter set that violates one of its invariants.
/// `field()` names the offending field.
class InvalidSpec : public ConfigError {
public:
    InvalidSpec(std::string field, const std::string& what)
        : ConfigError(field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class InvariantViolation : public Error {
public:
    using Error::Error;
};

class Unreachable : public InvariantViolation {
public:
    using InvariantViolation::InvariantViolation;
};

class InvalidSetpoint : public Error {
public:
    using Error::Error;
};

class UnknownRate : public Error {
public:
    using Error::Error;
};

class TransitionPending : public Error {
public:
    using Error::Error;
};

class ZeroItEnergy : public Error {
public:
    using Error::Error;
};

}  // namespace greendc
