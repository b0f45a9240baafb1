// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pfc {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inputs that violate a documented precondition or invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Text input that cannot be parsed. Line and column are 1-based; 0 means unknown.
class ParseError : public ValidationError {
public:
    ParseError(const std::string& what, std::size_t line, std::size_t column = 0);

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

/// Semantically invalid pulse sequence; `segment()` is the 0-based segment index.
class SequenceError : public ValidationError {
public:
    SequenceError(const std::string& what, std::size_t segment);

    std::size_t segment() const noexcept { return segment_; }

private:
    std::size_t segment_;
};

/// Integrator step too coarse for the fastest timescale of the chosen frame.
class ResolutionError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Numerical failure: non-finite state, failed self-convergence, fit divergence.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

} // namespace pfc
