#pragma once

#include <stdexcept>
#include <string>

namespace rim {

/// Bad input: violated precondition, malformed config, out-of-range index.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical routine failed to meet its contract (e.g. eigensolver
/// did not converge).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An objective evaluation was requested that the remaining budget
/// cannot pay for. Optimizers catch this and return their best-so-far.
class BudgetExhausted : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Rank statistic with an all-tied side: the tau denominator is zero.
/// Surfaced as an error instead of NaN so curves cannot silently
/// absorb a meaningless value.
class DegenerateRankError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File / serialization failure, annotated with the path involved.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace rim
