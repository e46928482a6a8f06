#pragma once

#include <stdexcept>
#include <string>

namespace isnmf {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Errors caused by malformed or inconsistent input data / files.
struct DataError : Error {
    using Error::Error;
};

/// Errors raised by the numerical routines themselves.
struct NumericError : Error {
    using Error::Error;
};

// --- data errors ---

struct IoError : DataError {
    using DataError::DataError;
};

struct BadMagic : DataError {
    using DataError::DataError;
};

struct TruncatedPayload : DataError {
    using DataError::DataError;
};

struct NonFiniteEntry : DataError {
    using DataError::DataError;
};

struct NegativeEntry : DataError {
    using DataError::DataError;
};

struct UnsupportedFormat : DataError {
    using DataError::DataError;
};

struct TooShort : DataError {
    using DataError::DataError;
};

struct AllSilent : DataError {
    using DataError::DataError;
};

struct EmptyDataset : DataError {
    using DataError::DataError;
};

struct ShapeMismatch : DataError {
    using DataError::DataError;
};

// --- numeric errors ---

struct NegativeInput : NumericError {
    using NumericError::NumericError;
};

struct ZeroColumn : NumericError {
    using NumericError::NumericError;
};

struct NonPositiveInit : NumericError {
    using NumericError::NumericError;
};

struct InconsistentStats : NumericError {
    using NumericError::NumericError;
};

struct DivergedObjective : NumericError {
    using NumericError::NumericError;
};

/// NaN/Inf appeared in an update; the run cannot continue.
struct NumericalFailure : NumericError {
    using NumericError::NumericError;
};

} // namespace isnmf
