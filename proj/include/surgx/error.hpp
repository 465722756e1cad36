#pragma once

#include <stdexcept>
#include <string>

namespace surgx {

/// Failure classes. The numeric values double as CLI exit codes.
enum class ErrorKind : int {
  io = 1,
  validation = 2,
  missing_artifact = 3,
  numeric = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorKind::validation, what);
}

}  // namespace surgx
