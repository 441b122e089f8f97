#pragma once

#include <stdexcept>
#include <string>

namespace fgfd {

// Base of every error raised by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class EmptyBatchError : public ShapeError {
public:
    EmptyBatchError() : ShapeError("empty batch: B must be >= 1") {}
};

class SelectionError : public Error {
public:
    using Error::Error;
};

class InternalConsistencyError : public Error {
public:
    using Error::Error;
};

// Dataset-level violations: single-class sets, empty evaluation sets.
class ProtocolError : public Error {
public:
    using Error::Error;
};

class TrainingDivergedError : public ProtocolError {
public:
    using ProtocolError::ProtocolError;
};

class DataError : public Error {
public:
    using Error::Error;
};

class ValidationError : public DataError {
public:
    ValidationError(const std::string& what, std::size_t line)
        : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ModelError : public Error {
public:
    using Error::Error;
};

class CheckpointError : public Error {
public:
    using Error::Error;
};

} // namespace fgfd
