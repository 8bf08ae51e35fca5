// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numbers>

#include "xbev/error.hpp"
#include "xbev/rng.hpp"

namespace xbev {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidInput: return "invalid_input";
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kInvalidSpec: return "invalid_spec";
    case ErrorKind::kInvalidOrder: return "invalid_order";
    case ErrorKind::kRange: return "range";
    case ErrorKind::kContract: return "contract";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

double CounterRng::normal() noexcept {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform01();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace xbev
