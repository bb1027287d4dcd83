#pragma once

#include <stdexcept>
#include <string>

namespace mmdesign {

// Base of every error raised by the library. The CLI maps the concrete
// subclasses onto its exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid experiment settings or function arguments (bad rho, ISI/TR that
// do not share a grid, unsupported field order, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed design, table or config file.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& what, int line = 0)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
          line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

// Numerical failure: degenerate HRF normalization, non-primitive polynomial,
// exhausted rejection sampler.
class NumericalError : public Error {
public:
    using Error::Error;
};

// A (theta, p) point is missing from a locally-optimal table.
class LookupError : public Error {
public:
    using Error::Error;
};

}  // namespace mmdesign
