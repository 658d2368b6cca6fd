#pragma once

#include <stdexcept>
#include <string>

namespace mww {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Requested Daubechies order is outside the tabulated range.
class UnsupportedOrderError : public Error {
public:
    using Error::Error;
};

/// The series is too short for the requested number of scales.
class InsufficientDataError : public Error {
public:
    InsufficientDataError(const std::string& what, int largest_feasible_scale)
        : Error(what), largest_feasible_scale_(largest_feasible_scale) {}

    int largest_feasible_scale() const noexcept { return largest_feasible_scale_; }

private:
    int largest_feasible_scale_;
};

/// Argument outside the domain where an integral or formula is finite.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Covariance matrix is not symmetric positive definite.
class CovarianceError : public Error {
public:
    using Error::Error;
};

/// Memory parameter is not annihilated by the wavelet (d >= M).
class VanishingMomentError : public Error {
public:
    using Error::Error;
};

/// Whittle criterion evaluated at a singular matrix.
class LikelihoodError : public Error {
public:
    using Error::Error;
};

/// Invalid estimation or scenario configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Empty or inconsistent scale range.
class RangeError : public Error {
public:
    using Error::Error;
};

/// Monte-Carlo scenario in which no replication succeeded.
class ScenarioError : public Error {
public:
    using Error::Error;
};

/// Malformed input text, with a 1-based position.
class ParseError : public Error {
public:
    ParseError(const std::string& what, int line, int column = 0)
        : Error(format(what, line, column)), line_(line), column_(column) {}

    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

private:
    static std::string format(const std::string& what, int line, int column) {
        std::string out = "line " + std::to_string(line);
        if (column > 0) out += ", column " + std::to_string(column);
        return out + ": " + what;
    }

    int line_;
    int column_;
};

}  // namespace mww
