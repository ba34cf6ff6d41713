#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace orthomg {

/// Raised when arguments violate an operation's preconditions
/// (dimension mismatch, malformed configuration, ...).
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A factorization hit an exactly zero pivot.
class SingularMatrix : public std::runtime_error {
public:
    SingularMatrix(const std::string& what, std::size_t index)
        : std::runtime_error(what), index_(index) {}

    /// Pivot row, subdomain id or block id depending on the raising site.
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

/// Non-finite values showed up during an iteration.
class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The async exchange watchdog expired.
class Timeout : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A worker group of the task-parallel solver failed.
class WorkerFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace orthomg
