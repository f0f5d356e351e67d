#pragma once

#include <stdexcept>
#include <string>

namespace nmcount {

/// Base for failures raised by the numerical engines. Precondition
/// violations use std::invalid_argument instead.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An iterative or spectral routine did not deliver a result meeting its
/// accuracy contract.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// The count ladder could not hold the probability mass within its cap.
class TruncationError : public Error {
public:
    using Error::Error;
};

/// A detection window admits more than one click with non-negligible
/// probability.
class WindowTooLargeError : public Error {
public:
    WindowTooLargeError(const std::string& what, double required_dt)
        : Error(what), required_dt_(required_dt) {}

    double required_dt() const noexcept { return required_dt_; }

private:
    double required_dt_;
};

}  // namespace nmcount
