#pragma once

#include <stdexcept>
#include <string>

namespace abcbl {

// Error categories map onto CLI exit codes: validation 2, numerical 3, I/O 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept = 0;
};

class ValidationError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

class NumericalError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

class IoError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

// Prefixes the message with a stage name, preserving the category.
[[noreturn]] void rethrow_with_stage(const std::string& stage);

}  // namespace abcbl
