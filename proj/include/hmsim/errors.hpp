#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace hmsim {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidDimension : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// A matrix or Bloch vector that does not describe a quantum state.
/// `min_eigenvalue()` is NaN when the failure is not a positivity failure.
class InvalidState : public Error {
public:
    explicit InvalidState(const std::string& what, double min_eigenvalue = std::numeric_limits<double>::quiet_NaN())
        : Error(what), min_eigenvalue_(min_eigenvalue) {}

    double min_eigenvalue() const noexcept { return min_eigenvalue_; }

private:
    double min_eigenvalue_;
};

class GeometryError : public Error {
public:
    using Error::Error;
};

class InvalidMembranePoint : public GeometryError {
public:
    using GeometryError::GeometryError;
};

class InvalidObservable : public Error {
public:
    using Error::Error;
};

class InvalidMembrane : public Error {
public:
    using Error::Error;
};

/// Sampled an outcome whose Lüders weight vanishes; indicates a sampling bug.
class ImpossibleOutcome : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace hmsim
