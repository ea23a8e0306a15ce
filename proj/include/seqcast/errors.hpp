#pragma once

#include <stdexcept>
#include <string>

namespace seqcast {

// Base of every error the library throws. The CLI maps each subclass to a
// distinct exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Tensor or parameter shapes that do not conform.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Bad input data: unreadable files, malformed rows, series too short.
class DataError : public Error {
public:
    using Error::Error;
};

// Non-finite values, degenerate statistics, diverged training.
class NumericalError : public Error {
public:
    using Error::Error;
};

// Invalid configuration or argument values.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace seqcast
