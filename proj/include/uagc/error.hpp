#pragma once

#include <stdexcept>
#include <string>

namespace uagc {

// Values double as process exit codes for the CLI.
enum class ErrorKind : int {
  usage = 2,
  input_format = 3,
  numeric = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Malformed or inconsistent input data (files, ids, shapes coming from data).
class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(ErrorKind::input_format, what) {}
};

/// Non-finite values during numeric work (training, optimisation).
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

/// Invalid configuration or arguments.
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

/// Tensor shapes that do not conform for an operation.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(ErrorKind::input_format, what) {}
};

}  // namespace uagc
