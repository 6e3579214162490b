#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace detkit {

/// Base of every error the toolkit throws. `kind()` is a stable short tag used
/// in machine-readable error records.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept { return "error"; }
};

/// Malformed input text. Carries the 1-based line number (0 when unknown).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::string file = {})
      : Error(format(what, line, file)), message_(what), line_(line), file_(std::move(file)) {}
  const char* kind() const noexcept override { return "parse"; }
  std::size_t line() const noexcept { return line_; }
  const std::string& file() const noexcept { return file_; }
  /// Message without the file/line prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  static std::string format(const std::string& what, std::size_t line,
                            const std::string& file) {
    std::string out;
    if (!file.empty()) out += file + ":";
    if (line > 0) out += std::to_string(line) + ": ";
    else if (!file.empty()) out += " ";
    return out + what;
  }
  std::string message_;
  std::size_t line_;
  std::string file_;
};

class RegistryError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "registry"; }
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "domain"; }
};

/// Inputs that violate an operation's precondition (misaligned arrays, etc).
class ContractError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "contract"; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "config"; }
};

class IoError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "io"; }
};

}  // namespace detkit
