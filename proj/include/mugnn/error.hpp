#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mugnn {

// Base of every error the library throws. The CLI maps each subtype to a
// distinct exit status.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A file could not be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
};

// Malformed input record; line is 1-based, 0 when unknown.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Seed files that reference unknown labels or contradict each other.
class AlignmentError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Non-finite loss or parameter during training.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace mugnn
