#pragma once

#include <stdexcept>
#include <string>

namespace uqkit {

// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Caller-supplied input is unusable: bad dimensions, malformed files,
// out-of-range indices, values outside an operation's domain.
class InputError : public Error {
public:
    explicit InputError(const std::string& what) : Error(what) {}
};

// A computation broke down numerically: failed factorization, singular
// system, degenerate conditioning.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(what) {}
};

// A model-level identity the inputs were required to satisfy does not hold.
class InvariantError : public Error {
public:
    explicit InvariantError(const std::string& what) : Error(what) {}
};

} // namespace uqkit
