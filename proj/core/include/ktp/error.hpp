#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ktp {

// Process exit codes shared by the CLI and by anything that maps errors to them.
enum class ExitCode : int {
  kOk = 0,
  kValidation = 1,
  kNumerical = 2,
  kIo = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& kind, const std::string& message)
      : std::runtime_error(message), code_(code), kind_(kind) {}

  ExitCode code() const noexcept { return code_; }
  const std::string& kind() const noexcept { return kind_; }

 private:
  ExitCode code_;
  std::string kind_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& message)
      : Error(ExitCode::kValidation, "shape", message) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message)
      : Error(ExitCode::kValidation, "config", message) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& message)
      : Error(ExitCode::kNumerical, "numerical", message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error(ExitCode::kIo, "io", message) {}
};

// Malformed file contents. `offset` is the byte offset where parsing stopped.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t offset)
      : Error(ExitCode::kValidation, "parse",
              message + " (at byte " + std::to_string(offset) + ")"),
        reason_(message),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string reason_;
  std::size_t offset_;
};

}  // namespace ktp
