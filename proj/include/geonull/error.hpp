#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace geonull {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed expression source. `offset` is the 0-based byte offset.
class ParseError : public Error {
public:
    ParseError(std::size_t offset, const std::string& what)
        : Error("parse error at offset " + std::to_string(offset) + ": " + what), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Evaluation outside the smooth domain of a function or metric chart.
class DomainError : public Error {
public:
    using Error::Error;
};

class SingularMatrixError : public Error {
public:
    SingularMatrixError(const std::string& what, double smallest)
        : Error(what), smallest_(smallest) {}

    /// Smallest pivot (or reciprocal condition estimate) encountered.
    double smallest() const noexcept { return smallest_; }

private:
    double smallest_;
};

/// The nullity of the curvature is not what an operation requires.
class NullityError : public Error {
public:
    using Error::Error;
};

/// I - t C0 became singular: the Riccati flow blows up at `critical_t`.
class BlowUpError : public Error {
public:
    BlowUpError(const std::string& what, double critical_t) : Error(what), critical_t_(critical_t) {}

    double critical_t() const noexcept { return critical_t_; }

private:
    double critical_t_;
};

} // namespace geonull
