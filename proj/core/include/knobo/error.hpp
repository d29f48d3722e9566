#pragma once

#include <stdexcept>
#include <string>

namespace knobo {

/// Failure categories. The numeric values double as CLI exit codes.
enum class ErrorKind : int {
  usage = 1,
  data = 2,
  remote = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Caller broke a precondition (bad argument, inconsistent options).
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

/// Input data is malformed, missing, or inconsistent.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

/// A remote oracle could not be reached or answered out of contract.
class RemoteError : public Error {
 public:
  explicit RemoteError(const std::string& what) : Error(ErrorKind::remote, what) {}
};

}  // namespace knobo
