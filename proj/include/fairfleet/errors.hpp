#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fairfleet {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text (network files, scenario documents).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Input is well formed but violates a model invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class UnknownState : public Error {
 public:
  explicit UnknownState(const std::string& id)
      : Error("unknown state '" + id + "'"), id_(id) {}
  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

/// Formula text could not be tokenized or parsed. `position()` is a byte
/// offset into the source string.
class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& what, std::size_t position)
      : Error(what + " at position " + std::to_string(position)),
        position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

/// Negation applied to something other than an atomic proposition.
class NegationError : public SyntaxError {
 public:
  explicit NegationError(std::size_t position)
      : SyntaxError("negation may only be applied to an atomic proposition",
                    position) {}
};

class CapacityExceeded : public Error {
 public:
  using Error::Error;
};

class MissingDecomposition : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace fairfleet
