#pragma once

#include <stdexcept>
#include <string>

namespace emap {

/// Malformed input: bad shapes, unreadable files, invalid flags or parameters.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite values, failed convergence or a failed numerical verification.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Training diverged (loss became NaN or infinite).
class TrainingError : public NumericError {
public:
    using NumericError::NumericError;
};

/// The request exceeds what a method supports (e.g. table size limits).
class CapabilityError : public InputError {
public:
    using InputError::InputError;
};

/// A metric is undefined for the given labels (e.g. AUC with one class).
class UndefinedMetric : public NumericError {
public:
    using NumericError::NumericError;
};

/// Formula syntax error; `position` is a byte offset into the input.
class ParseError : public InputError {
public:
    ParseError(const std::string& what, std::size_t position)
        : InputError(what + " at position " + std::to_string(position)), position_(position) {}

    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

}  // namespace emap
