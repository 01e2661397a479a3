#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dynwire {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes or endpoints of two objects do not line up.
class MismatchError : public Error {
 public:
  using Error::Error;
};

// Structural problem detected while building an object (dangling name,
// bad index, duplicate label).
class StructureError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t position)
      : Error(message + " at offset " + std::to_string(position)),
        position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

// A numeric evaluation produced a non-finite value or failed to converge.
class NumericError : public Error {
 public:
  NumericError(const std::string& message, std::size_t step = npos,
               std::size_t coordinate = npos)
      : Error(message), step_(step), coordinate_(coordinate) {}

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::size_t step() const noexcept { return step_; }
  std::size_t coordinate() const noexcept { return coordinate_; }

 private:
  std::size_t step_;
  std::size_t coordinate_;
};

// A model violates one of its well-formedness conditions.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace dynwire
