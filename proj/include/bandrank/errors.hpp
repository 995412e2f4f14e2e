#pragma once

#include <stdexcept>
#include <string>

namespace bandrank {

/// Base of every error raised by the library. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or missing header, unknown band identifier.
class FormatError : public Error {
public:
    using Error::Error;
};

/// File contents disagree with the declared shape.
class CorruptDataError : public Error {
public:
    using Error::Error;
};

class BoundsError : public Error {
public:
    using Error::Error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Not enough pixels of a class to satisfy a sampling request.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

/// Training data a classifier cannot learn from (e.g. a single class).
class DegenerateDataError : public Error {
public:
    using Error::Error;
};

/// Non-finite feature values.
class DataError : public Error {
public:
    using Error::Error;
};

}  // namespace bandrank
