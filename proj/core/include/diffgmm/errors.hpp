#pragma once

#include <stdexcept>
#include <string>

namespace diffgmm {

// Exit codes used by the command-line tool.
enum class ExitCode : int {
  ok = 0,
  usage = 2,
  data = 3,
  numeric = 4,
};

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual ExitCode exit_code() const noexcept { return ExitCode::data; }
};

// A caller violated a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::usage; }
};

class ShapeError : public ContractError {
 public:
  using ContractError::ContractError;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class DegenerateDataError : public Error {
 public:
  using Error::Error;
};

// NaN or Inf detected where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::numeric; }
};

[[noreturn]] void throw_contract(const std::string& what);
[[noreturn]] void throw_shape(const std::string& what);

}  // namespace diffgmm
