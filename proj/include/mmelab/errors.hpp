#pragma once

#include <stdexcept>
#include <string>

namespace mmelab {

// Base of every error raised by the library. Callers that only care about
// "the lab failed" catch this; the CLI maps it to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidMap : public Error {
 public:
  using Error::Error;
};

class CoprimalityViolation : public Error {
 public:
  using Error::Error;
};

class RootSolveFailure : public Error {
 public:
  using Error::Error;
};

class DegreeCapExceeded : public Error {
 public:
  using Error::Error;
};

class ExceptionalSeed : public Error {
 public:
  using Error::Error;
};

class WindowTooSmall : public Error {
 public:
  using Error::Error;
};

class OutOfWindow : public Error {
 public:
  using Error::Error;
};

class UnknownComponent : public Error {
 public:
  using Error::Error;
};

class NotAPolynomial : public Error {
 public:
  using Error::Error;
};

class JNotConnected : public Error {
 public:
  using Error::Error;
};

class EpsilonBelowResolution : public Error {
 public:
  using Error::Error;
};

// A documented precondition of an operation does not hold.
class PreconditionViolation : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(int line, const std::string& what)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  int line() const noexcept { return line_; }

 private:
  int line_;
};

}  // namespace mmelab
