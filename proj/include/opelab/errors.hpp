#pragma once

#include <stdexcept>
#include <string>

namespace opelab {

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A symmetric matrix handed to an SPD routine had a pivot <= 1e-14.
struct NotPositiveDefinite : Error {
    using Error::Error;
};

/// The Jacobi eigenvalue sweep did not reach its off-diagonal tolerance.
struct NonConvergence : Error {
    using Error::Error;
};

/// A stage index h was outside [1, H].
struct InvalidStage : Error {
    using Error::Error;
};

/// The behavior covariance has a (numerically) zero minimum eigenvalue.
struct DegenerateCoverage : Error {
    using Error::Error;
};

/// Two datasets that must be stage-aligned disagree on (H, K).
struct StageMismatch : Error {
    using Error::Error;
};

/// An index argument was outside its documented range.
struct OutOfRange : Error {
    using Error::Error;
};

/// A halves split was requested on a dataset with odd K.
struct OddK : Error {
    using Error::Error;
};

/// A configuration document failed validation; the message names the field.
struct ConfigError : Error {
    using Error::Error;
};

} // namespace opelab
