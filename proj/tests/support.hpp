// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include "xbev/error.hpp"
#include "xbev/matrix.hpp"
#include "xbev/rng.hpp"

namespace xbev::test {

inline MatrixD random_matrix(std::size_t rows, std::size_t cols, CounterRng& rng,
                             double scale = 1.0) {
  MatrixD m(rows, cols);
  for (double& v : m.values()) v = scale * rng.normal();
  return m;
}

inline MatrixD filled(std::size_t rows, std::size_t cols, double value) {
  MatrixD m(rows, cols);
  for (double& v : m.values()) v = value;
  return m;
}

// Fresh directory under the system temp dir, removed first if present.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("xbev-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Runs `body` and returns the Error it threw, or a sentinel with detail
// "<none>" when it did not throw.
template <typename F>
Error catch_error(F&& body) {
  try {
    body();
  } catch (const Error& e) {
    return e;
  }
  return Error(ErrorKind::kContract, "no error thrown", "<none>");
}

}  // namespace xbev::test
