#pragma once

#include <stdexcept>
#include <string>

namespace swarmnet {

// Validation failures (bad configuration, bad arguments, missing inputs).
// The CLI maps these to exit code 1; every other Error maps to 2.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public ValidationError {
public:
    ConfigError(std::string field, const std::string& what)
        : ValidationError("invalid configuration field '" + field + "': " + what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class MissingInputError : public ValidationError {
public:
    explicit MissingInputError(std::string path)
        : ValidationError("missing input: " + path), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidWellError : public Error {
public:
    using Error::Error;
};

class InsufficientFramesError : public Error {
public:
    using Error::Error;
};

class DegenerateImageError : public Error {
public:
    using Error::Error;
};

class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

class EmptyInputError : public Error {
public:
    using Error::Error;
};

class InconsistencyError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class DivergenceError : public Error {
public:
    DivergenceError(int epoch, const std::string& what)
        : Error("training diverged at epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}
    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace swarmnet
