#pragma once

#include <stdexcept>
#include <string>

namespace randpoly {

/// Invalid argument or precondition violation (dimension mismatch, t <= 0, ...).
class InputError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical procedure could not produce a result (rejection budget exhausted,
/// zero variance, singular input).
class NumericError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message)
{
    if (!condition) {
        throw InputError(message);
    }
}

} // namespace randpoly
