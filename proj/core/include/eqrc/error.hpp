#pragma once

#include <stdexcept>
#include <string>

namespace eqrc {

// Base for every error raised by the library. Callers that only care about
// "something in eqrc failed" can catch this.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Precondition violated by the caller (bad setting, j = 0, t outside [0,1), ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

// Left/right records could not be joined into pairs.
class PairingError : public Error {
public:
    using Error::Error;
};

// Malformed wire message, dataset line or key file.
class FormatError : public Error {
public:
    using Error::Error;
};

// Socket or peer failure in the distributed harness.
class NetworkError : public Error {
public:
    using Error::Error;
};

}  // namespace eqrc
