#pragma once

#include <stdexcept>
#include <string>

namespace mrelu {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or dimension mismatch between networks, layers or inputs.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A builder precondition was violated (m = 0, N below threshold, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Argument outside the domain of a function or a derivative series.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed or incompatible serialized network.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// A construction stage could not reach its error budget.
class BudgetError : public Error {
 public:
  BudgetError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace mrelu
