// Copyright 2026 The TCD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace tcd {

// Errors are split into two families so the CLI can map them onto exit codes:
// validation errors (bad parameters, bad configuration) exit with 1, data
// errors (unreadable files, corrupt traces, exhausted replays) exit with 2.

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

/// Out-of-range scalar parameter (tau, beta, alpha, ...).
class ParameterError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Shape mismatch: empty vectors, length mismatch, too few layers.
class DimensionError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Invalid configuration. `key()` names the offending key when known.
class ConfigError : public ValidationError {
public:
    ConfigError(std::string key, const std::string& what)
        : ValidationError(key.empty() ? what : "'" + key + "': " + what), key_(std::move(key)) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// Unsupported or malformed file contents (image or trace).
class FormatError : public DataError {
public:
    using DataError::DataError;
};

/// File ended before the declared payload was complete.
class TruncatedError : public FormatError {
public:
    using FormatError::FormatError;
};

class IoError : public DataError {
public:
    using DataError::DataError;
};

/// Watermark placement could not be resolved inside the base image.
class CompositionError : public DataError {
public:
    using DataError::DataError;
};

class ChecksumError : public FormatError {
public:
    ChecksumError(std::string sample, const std::string& what)
        : FormatError(what), sample_(std::move(sample)) {}

    const std::string& sample() const noexcept { return sample_; }

private:
    std::string sample_;
};

/// A trace-backed model was asked for a step beyond its recorded horizon.
class ReplayExhausted : public DataError {
public:
    using DataError::DataError;
};

}  // namespace tcd
