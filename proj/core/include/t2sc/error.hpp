#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace t2sc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when answer text is not a recognizable tuple-list literal.
class ParseError : public Error {
 public:
  ParseError(std::size_t position, std::string reason)
      : Error("parse error at " + std::to_string(position) + ": " + reason),
        position_(position),
        reason_(std::move(reason)) {}

  std::size_t position() const noexcept { return position_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t position_;
  std::string reason_;
};

class EmptyInputError : public Error {
 public:
  EmptyInputError() : Error("majority vote over an empty candidate list") {}
};

}  // namespace t2sc
