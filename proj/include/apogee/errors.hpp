#pragma once

#include <stdexcept>
#include <string>

namespace apogee {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed input file (JSON/CSV syntax, missing columns, bad numbers).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Structurally valid input that violates a domain invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Lookup of a named entity that does not exist.
class NotFoundError : public Error {
public:
    using Error::Error;
};

/// Integrator failure: non-finite state, bad tolerances, step underflow.
class SimulationError : public Error {
public:
    using Error::Error;
};

/// Tensor dimensions do not match.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Training loss became non-finite.
class DivergenceError : public Error {
public:
    using Error::Error;
};

/// Flight config references a motor index outside the model's training database.
class MotorIndexError : public Error {
public:
    using Error::Error;
};

} // namespace apogee
