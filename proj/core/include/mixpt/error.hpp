#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mixpt {

// Base for every error raised by the library. The CLI maps subclasses onto
// exit codes: InputError family -> 2, RuntimeFailure family -> 3.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad input data or configuration.
class InputError : public Error {
public:
    using Error::Error;
};

class ParseError : public InputError {
public:
    ParseError(const std::string& message, std::size_t line)
        : InputError("line " + std::to_string(line) + ": " + message), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ValidationError : public InputError {
public:
    ValidationError(const std::string& message, std::size_t row)
        : InputError("row " + std::to_string(row) + ": " + message), row_(row) {}

    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

class BuildError : public InputError {
public:
    BuildError(const std::string& message, std::vector<std::string> missing)
        : InputError(message), missing_(std::move(missing)) {}

    const std::vector<std::string>& missing() const noexcept { return missing_; }

private:
    std::vector<std::string> missing_;
};

class ConfigError : public InputError {
public:
    using InputError::InputError;
};

class SynthesisError : public InputError {
public:
    SynthesisError(const std::string& kind, const std::string& message)
        : InputError(kind + ": " + message), kind_(kind) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class ScheduleError : public InputError {
public:
    using InputError::InputError;
};

// A requested negative pool (easy or hard) is empty for an image.
class PolicyUnavailable : public InputError {
public:
    using InputError::InputError;
};

// Hard-negative caption requested but the caption has no lexicon noun.
class NoNounFound : public InputError {
public:
    using InputError::InputError;
};

class ShapeError : public InputError {
public:
    using InputError::InputError;
};

class IntegrityError : public InputError {
public:
    using InputError::InputError;
};

class VersionError : public InputError {
public:
    using InputError::InputError;
};

class FingerprintError : public InputError {
public:
    using InputError::InputError;
};

// Failures that happen while computing, not while reading input.
class RuntimeFailure : public Error {
public:
    using Error::Error;
};

class NumericError : public RuntimeFailure {
public:
    using RuntimeFailure::RuntimeFailure;
};

}  // namespace mixpt
