#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace uwpose {

// Base of every error thrown by the library. The CLI maps subclasses to
// exit codes (see tools/uwpose_cli.cpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// A caller broke an API precondition (non-scalar loss, missing tape, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

class DegenerateQuaternionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class OutOfBoundsError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace uwpose
