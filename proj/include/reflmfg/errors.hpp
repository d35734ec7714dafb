#pragma once

#include <stdexcept>
#include <string>

namespace reflmfg {

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A continuous parameter (h, L, T, sigma, ...) is out of its admissible range.
struct ParameterError : Error {
    using Error::Error;
};

/// L/h or T/delta is not an integer within tolerance.
struct DivisibilityError : Error {
    using Error::Error;
};

/// A point or index lies outside the domain it must belong to.
struct RangeError : Error {
    using Error::Error;
};

/// A path increment exceeds the barrier width L.
struct IncrementError : Error {
    using Error::Error;
};

/// Two grid-indexed objects do not share the same discretization.
struct GridMismatchError : Error {
    using Error::Error;
};

/// A model specification (coefficient table, control set, ...) is malformed.
struct SpecError : Error {
    using Error::Error;
};

/// A computed quantity is non-finite or violates a sanity bound.
struct NumericsError : Error {
    using Error::Error;
};

/// A run configuration file is malformed or inconsistent.
struct ConfigError : Error {
    using Error::Error;
};

} // namespace reflmfg
