#pragma once

#include <stdexcept>
#include <string>

namespace bcl {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonFiniteError : Error {
    using Error::Error;
};

struct NonSymmetricError : Error {
    using Error::Error;
};

struct DimensionError : Error {
    using Error::Error;
};

// Violated parameter domain: non-positive gain/tau/mu, bad saturation bounds,
// bad PSE levels, singular stage gain, and the like.
struct DomainError : Error {
    using Error::Error;
};

struct NotPositiveDefiniteError : Error {
    using Error::Error;
};

// ETF input outside the open band when clamping is disabled.
struct OutOfBandError : Error {
    using Error::Error;
};

struct GridMismatchError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct PreconditionError : Error {
    using Error::Error;
};

} // namespace bcl
