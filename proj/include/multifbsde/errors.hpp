#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mfbsde {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside its admissible domain (non-positive step, zero count, ...).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Shape mismatch or invalid parent reference while recording on a tape.
class GraphError : public Error {
public:
    using Error::Error;
};

/// A simulated state or a solver field became non-finite.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::ptrdiff_t step = -1, std::ptrdiff_t sample = -1)
        : Error(what), step_(step), sample_(sample) {}

    std::ptrdiff_t step() const noexcept { return step_; }
    std::ptrdiff_t sample() const noexcept { return sample_; }

private:
    std::ptrdiff_t step_;
    std::ptrdiff_t sample_;
};

/// Values left the domain a transform needs (e.g. log of a non-positive field).
class NumericalDomainError : public Error {
public:
    using Error::Error;
};

/// Invalid experiment or training configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace mfbsde
