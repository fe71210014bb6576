#pragma once

#include <stdexcept>
#include <string>

namespace fuselens {

/// Bad or inconsistent input data (unreadable file, unsupported format,
/// invalid parameters). Maps to CLI exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape or patch-size mismatch between images and parameters.
class DimensionError : public InputError {
 public:
  using InputError::InputError;
};

/// Failure writing results. Maps to CLI exit code 3.
class OutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite loss or gradient during optimization. Maps to CLI exit code 4.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int iteration, const std::string& what)
      : std::runtime_error("diverged at iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}

  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

}  // namespace fuselens
