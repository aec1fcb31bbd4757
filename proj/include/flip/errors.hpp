#pragma once

#include <stdexcept>
#include <string>

namespace flip {

// Base class for all library errors. Subtypes map onto CLI exit codes:
// input/validation problems -> 2, optimizer divergence -> 3, capacity -> 4.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input file content (carries a line number where known).
class ParseError : public Error {
public:
    ParseError(const std::string& msg, long line)
        : Error(msg + " (line " + std::to_string(line) + ")"), line_(line) {}
    long line() const { return line_; }

private:
    long line_;
};

// Input violates a documented invariant (non-positive price, bad alphabet, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

// Too few usable time bins to perform the requested operation.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

// Dimension mismatch between states, histories and parameter sets.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Exact enumeration requested above the state-space cap.
class CapacityError : public Error {
public:
    using Error::Error;
};

// Optimizer produced a non-finite objective.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& msg, int iteration)
        : Error(msg + " (iteration " + std::to_string(iteration) + ")"),
          iteration_(iteration) {}
    int iteration() const { return iteration_; }

private:
    int iteration_;
};

// KL divergence evaluated where q = 0 but p > 0 without smoothing.
class SupportError : public Error {
public:
    using Error::Error;
};

// Scoring run contains a single outcome class; ROC is undefined.
class DegenerateRunError : public Error {
public:
    using Error::Error;
};

// Correlation of a constant series.
class UndefinedCorrelationError : public Error {
public:
    using Error::Error;
};

// No admissible latent correlation reproduces an empirical binary moment.
class AttainabilityError : public Error {
public:
    using Error::Error;
};

// Iterative fit stopped without meeting its convergence criterion.
class FitError : public Error {
public:
    using Error::Error;
};

}  // namespace flip
