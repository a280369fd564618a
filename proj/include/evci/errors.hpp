#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace evci {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

/// Row/column or length mismatch between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

class PlanError : public Error {
 public:
  using Error::Error;
};

class CalibrationError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input; `line()` is 1-based, 0 when not line-specific.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Not enough eligible windows; `achievable()` is the most that fit.
class CapacityError : public Error {
 public:
  CapacityError(std::size_t requested, std::size_t achievable)
      : Error("requested " + std::to_string(requested) +
              " windows but only " + std::to_string(achievable) +
              " fit the eligible region"),
        achievable_(achievable) {}

  std::size_t achievable() const noexcept { return achievable_; }

 private:
  std::size_t achievable_;
};

/// Demand exceeded grid cap plus available storage discharge.
class InfeasibleDispatchError : public Error {
 public:
  InfeasibleDispatchError(std::int64_t timestep, const std::string& what)
      : Error("t=" + std::to_string(timestep) + ": " + what),
        timestep_(timestep) {}

  std::int64_t timestep() const noexcept { return timestep_; }

 private:
  std::int64_t timestep_;
};

}  // namespace evci
