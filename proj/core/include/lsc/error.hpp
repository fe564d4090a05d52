#pragma once

#include <stdexcept>
#include <string>

namespace lsc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on an argument or configuration value was violated.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A computed quantity became non-finite or exceeded a resource budget.
class NumericFailure : public Error {
public:
    using Error::Error;
};

/// Stored data violates an invariant it is required to satisfy.
class CorruptedInput : public Error {
public:
    using Error::Error;
};

} // namespace lsc
