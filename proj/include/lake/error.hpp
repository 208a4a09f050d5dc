#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lake {

/// Base of every error raised by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input failed validation (bad file, bad manifest, bad parameter). Maps to CLI exit code 1.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Malformed NPY bytes. Carries the byte offset where decoding stopped.
class FormatError : public ValidationError {
public:
    FormatError(const std::string& what, std::size_t offset)
        : ValidationError(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class ShapeError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Manifest JSON is missing a field, has an unknown field or has the wrong type.
class SchemaError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ParameterError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Input too small or empty for the requested computation.
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

/// A metric is undefined for the given labels (e.g. a single class).
class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace lake
