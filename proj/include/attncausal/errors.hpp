#pragma once

#include <stdexcept>
#include <string>

namespace attncausal {

// Base of every error raised by the library. Callers that only care about
// "something went wrong in the toolkit" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition on an argument was violated (bad index, bad size, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// A model violates a structural invariant, e.g. (I - G) is singular.
class StructuralError : public Error {
 public:
  using Error::Error;
};

// A covariance or correlation computation hit a singular / non-positive
// quantity.
class DegeneracyError : public Error {
 public:
  using Error::Error;
};

// Orientation rules asked for a mark that contradicts one already written.
class InconsistencyError : public Error {
 public:
  using Error::Error;
};

// A conditional-independence oracle or model oracle failed.
class OracleError : public Error {
 public:
  using Error::Error;
};

// A replay trace has no record for the requested key.
class TraceMissError : public OracleError {
 public:
  TraceMissError(const std::string& key, const std::string& printable)
      : OracleError("trace miss for key [" + printable + "]"), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

// The networked oracle could not complete a round trip.
class TransportError : public OracleError {
 public:
  TransportError(const std::string& what, int attempts)
      : OracleError(what + " (after " + std::to_string(attempts) + " attempts)"),
        attempts_(attempts) {}
  int attempts() const { return attempts_; }

 private:
  int attempts_;
};

// Input text could not be parsed; line is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace attncausal
