// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace xbev {

enum class ErrorKind {
  kInvalidInput,
  kShape,
  kInvalidSpec,
  kInvalidOrder,
  kRange,
  kContract,
  kNumeric,
  kConfig,
  kIo,
};

std::string_view to_string(ErrorKind kind);

// All library failures are reported through this type. `detail` carries the
// stage tag for numeric errors, the field path for config errors and the file
// name for I/O errors.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string detail = {})
      : std::runtime_error(message), kind_(kind), detail_(std::move(detail)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message,
                              std::string detail = {}) {
  throw Error(kind, message, std::move(detail));
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace xbev
