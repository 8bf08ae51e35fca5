// SPDX-License-Identifier: Apache-2.0

#include "xbev/harness/io.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

#include "xbev/error.hpp"

namespace xbev::harness {
namespace {

constexpr char kMagic[4] = {'X', 'B', 'E', 'V'};
constexpr std::uint32_t kMaxRank = 16;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

[[noreturn]] void io_fail(const std::string& message, const std::string& name) {
  fail(ErrorKind::kIo, name + ": " + message, name);
}

}  // namespace

std::size_t Tensor::numel() const noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, std::uint32_t b) { return a * b; });
}

MatrixD Tensor::as_matrix() const {
  require(!shape.empty(), ErrorKind::kShape, "rank-0 tensor has no matrix view");
  const std::size_t cols = shape.back();
  const std::size_t rows = cols == 0 ? 0 : numel() / cols;
  MatrixD m(rows, cols);
  for (std::size_t i = 0; i < data.size(); ++i) m.values()[i] = static_cast<double>(data[i]);
  return m;
}

Tensor Tensor::from_matrix(const MatrixD& m, std::vector<std::uint32_t> shape) {
  Tensor t{std::move(shape), {}};
  require(t.numel() == m.size(), ErrorKind::kShape, "tensor shape does not match matrix size");
  t.data.resize(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) t.data[i] = static_cast<float>(m.values()[i]);
  return t;
}

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  require(t.data.size() == t.numel(), ErrorKind::kShape, "tensor payload does not match shape");
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
  for (auto d : t.shape) put_u32(out, d);
  out.reserve(out.size() + 4 * t.data.size());
  for (float f : t.data) put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

Tensor decode_tensor(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  if (bytes.size() < 8) io_fail("truncated header", name);
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) io_fail("bad magic (expected XBEV)", name);
  const std::uint32_t rank = get_u32(bytes.data() + 4);
  if (rank > kMaxRank) io_fail("rank " + std::to_string(rank) + " too large", name);
  const std::size_t header = 8 + 4 * static_cast<std::size_t>(rank);
  if (bytes.size() < header) io_fail("truncated shape", name);
  Tensor t;
  for (std::uint32_t i = 0; i < rank; ++i) t.shape.push_back(get_u32(bytes.data() + 8 + 4 * i));
  const std::size_t n = t.numel();
  if (bytes.size() != header + 4 * n) {
    io_fail("payload holds " + std::to_string(bytes.size() - header) + " bytes, shape needs " +
                std::to_string(4 * n),
            name);
  }
  t.data.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    t.data[i] = std::bit_cast<float>(get_u32(bytes.data() + header + 4 * i));
  }
  return t;
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  write_bytes(path, encode_tensor(t));
}

Tensor read_tensor(const std::filesystem::path& path) {
  return decode_tensor(read_bytes(path), path.string());
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_fail("cannot open for reading", path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) io_fail("cannot open for writing", path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) io_fail("write failed", path.string());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::string read_text(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  return {bytes.begin(), bytes.end()};
}

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    io_fail("cannot create directory (" + ec.message() + ")", dir.string());
  }
}

std::string sha256_hex(const std::vector<std::uint8_t>& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    fail(ErrorKind::kIo, "SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_bytes(path)); }

}  // namespace xbev::harness
