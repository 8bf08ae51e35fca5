// SPDX-License-Identifier: Apache-2.0
//
// XBEV tensor files: "XBEV", u32 LE rank, rank x u32 LE dims, then the
// row-major payload as f32 LE.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xbev/matrix.hpp"

namespace xbev::harness {

struct Tensor {
  std::vector<std::uint32_t> shape;
  std::vector<float> data;

  std::size_t numel() const noexcept;
  // Collapses all leading axes into rows: (prod shape[:-1]) x shape[-1].
  MatrixD as_matrix() const;
  static Tensor from_matrix(const MatrixD& m, std::vector<std::uint32_t> shape);
  bool operator==(const Tensor&) const = default;
};

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
// `name` is used in error messages.
Tensor decode_tensor(const std::vector<std::uint8_t>& bytes, const std::string& name);

void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);
void ensure_directory(const std::filesystem::path& dir);

std::string sha256_hex(const std::vector<std::uint8_t>& bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace xbev::harness
