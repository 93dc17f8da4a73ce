#pragma once

#include <stdexcept>
#include <string>

namespace spectf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shapes of inputs do not agree (or a dimension is out of range).
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Input data failed validation (bad CSV, missing values, invalid responses).
class DataError : public Error {
public:
    using Error::Error;
};

/// A numerical procedure failed (singular system, divergence).
class NumericalError : public Error {
public:
    using Error::Error;
};

} // namespace spectf
