#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace memop {

// Base for everything the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes or dimensions that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Arguments outside an operation's domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed config, dataset, checkpoint or CSV input.
class FormatError : public Error {
 public:
  using Error::Error;
};

// A time stepper produced a non-finite or runaway state.
class BlowUpError : public Error {
 public:
  BlowUpError(const std::string& what, std::size_t step)
      : Error(what + " (step " + std::to_string(step) + ")"), reason_(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string reason_;
  std::size_t step_;
};

// Training loss became NaN or infinite.
class NanLossError : public Error {
 public:
  explicit NanLossError(std::size_t epoch)
      : Error("non-finite training loss at epoch " + std::to_string(epoch)), epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

}  // namespace memop
