#pragma once

#include <stdexcept>
#include <string>

namespace fc {

/// Failure category. The numeric values double as process exit codes.
enum class ErrorKind : int {
  config = 1,
  backend = 2,
  data = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

class BackendError : public Error {
 public:
  explicit BackendError(const std::string& what) : Error(ErrorKind::backend, what) {}
};

/// Malformed or unexpected traffic on the wire. Carries the offending payload.
class ProtocolError : public BackendError {
 public:
  ProtocolError(const std::string& what, std::string payload)
      : BackendError(what + (payload.empty() ? std::string() : ": " + payload)),
        payload_(std::move(payload)) {}
  const std::string& payload() const noexcept { return payload_; }

 private:
  std::string payload_;
};

}  // namespace fc
