#pragma once

#include <stdexcept>
#include <string>

namespace msdon {

// Base class for every failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Caller passed arguments that violate a precondition.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

// Configuration file or flag problems (unknown keys, bad values).
class ConfigError : public Error {
public:
    using Error::Error;
};

// A required input file or directory is missing or unreadable.
class InputError : public Error {
public:
    using Error::Error;
};

// Solver breakdown, non-finite loss, failed factorization.
class NumericError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void require(bool cond, const std::string& what)
{
    if (!cond) throw InvalidArgument(what);
}

} // namespace detail
} // namespace msdon
