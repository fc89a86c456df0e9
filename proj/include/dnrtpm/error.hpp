#pragma once

#include <stdexcept>
#include <string>

namespace dnrtpm {

// Base of everything the library throws on contract violations.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Non-finite samples, empty sequences, malformed intervals.
class InvalidInput : public Error {
  public:
    using Error::Error;
};

/// A sequence whose full-length standard deviation is (numerically) zero.
class DegenerateInput : public Error {
  public:
    using Error::Error;
};

/// Bad matcher / generator parameters.
class ConfigError : public Error {
  public:
    using Error::Error;
};

class RangeError : public Error {
  public:
    using Error::Error;
};

/// Internal bookkeeping went wrong (e.g. trimming prefix sums still in use).
class ConsistencyError : public Error {
  public:
    using Error::Error;
};

class TraceExhausted : public Error {
  public:
    using Error::Error;
};

/// Text input that does not parse; carries the 1-based line number.
class ParseError : public Error {
  public:
    ParseError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

class IoError : public Error {
  public:
    using Error::Error;
};

} // namespace dnrtpm
