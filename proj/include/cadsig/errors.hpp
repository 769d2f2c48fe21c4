#pragma once

#include <stdexcept>
#include <string>

namespace cadsig {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Sequence or program exceeds the fixed language capacity (273 tokens, 10 steps).
class CapacityError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

/// Token stream rejected by the parser. `position` is the index of the first
/// offending token.
class SyntaxError : public Error {
 public:
  SyntaxError(int position, std::string expected, std::string found)
      : Error("syntax error at token " + std::to_string(position) + ": expected " + expected +
              ", found " + found),
        position_(position),
        expected_(std::move(expected)),
        found_(std::move(found)) {}

  int position() const { return position_; }
  const std::string& expected() const { return expected_; }
  const std::string& found() const { return found_; }

 private:
  int position_;
  std::string expected_;
  std::string found_;
};

}  // namespace cadsig
