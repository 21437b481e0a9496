#pragma once

#include <stdexcept>
#include <string>

namespace actsketch {

/// Coarse error classes. The CLI maps each class to its own exit code.
enum class ErrorKind {
  io = 1,
  ingest,
  validation,
  shape,
  schema,
  config,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string &what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline int exit_code(ErrorKind kind) noexcept {
  // 0 is success, 1 is reserved for unexpected failures.
  return 10 + static_cast<int>(kind);
}

}  // namespace actsketch
