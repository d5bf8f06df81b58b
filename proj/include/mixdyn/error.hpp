#pragma once

#include <stdexcept>
#include <string>

namespace mixdyn {

/// Bad input: malformed files, violated preconditions, invalid configuration.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical procedure could not produce a usable result.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mixdyn
