#pragma once

#include <stdexcept>
#include <string>

namespace mlpp {

/// Base class for every error raised by the library. The CLI maps these to exit code 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input (bad grid, wrong labels, unreadable file).
class InputError : public Error {
public:
    using Error::Error;
};

/// Sizes that do not agree or exceed what the data supports.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Input carries no variability where some is required.
class DegenerateError : public Error {
public:
    using Error::Error;
};

/// Non-finite value produced inside a computation.
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace mlpp
