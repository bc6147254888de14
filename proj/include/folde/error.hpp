#pragma once

#include <stdexcept>
#include <string>

namespace folde {

// Base class for everything the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed text or binary input.
class ParseError : public Error {
public:
    using Error::Error;
};

// Well-formed input that violates a domain invariant.
class InvariantError : public Error {
public:
    using Error::Error;
};

// Operation requested in the wrong campaign state.
class StateError : public Error {
public:
    using Error::Error;
};

// A numerical procedure could not proceed (singular update, failed calibration).
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace folde
