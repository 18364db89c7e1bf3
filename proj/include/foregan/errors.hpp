#pragma once

#include <stdexcept>
#include <string>

namespace foregan {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor or image dimensions do not match what an operation requires.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A configuration value violates its documented constraints.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// A dataset on disk is internally inconsistent (e.g. frame count mismatch).
class StructuralError : public Error {
public:
    using Error::Error;
};

/// A required file or directory could not be read.
class LoadError : public Error {
public:
    using Error::Error;
};

/// Input data is numerically unusable (NaN / Inf where finite values are required).
class DataError : public Error {
public:
    using Error::Error;
};

/// Adversarial training diverged (non-finite loss).
class TrainingError : public Error {
public:
    using Error::Error;
};

/// Latent optimization produced a non-finite loss.
class InversionError : public Error {
public:
    using Error::Error;
};

/// Run configuration is unusable (missing checkpoint, modality mismatch, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace foregan
