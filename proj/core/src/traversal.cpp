// SPDX-License-Identifier: Apache-2.0

#include "xbev/traversal.hpp"

#include <array>
#include <utility>

#include "xbev/error.hpp"

namespace xbev {
namespace {

constexpr std::array<std::pair<ScanOrder, std::string_view>, 4> kScanNames{{
    {ScanOrder::kRowMajor, "row_major"},
    {ScanOrder::kColumnMajor, "column_major"},
    {ScanOrder::kRowSnake, "row_snake"},
    {ScanOrder::kColumnSnake, "column_snake"},
}};

// Sequence position of cell (h, w) in an H x W map under a plain scan order.
std::int64_t position(ScanOrder order, std::int64_t H, std::int64_t W, std::int64_t h,
                      std::int64_t w) {
  switch (order) {
    case ScanOrder::kRowMajor: return h * W + w;
    case ScanOrder::kColumnMajor: return w * H + h;
    case ScanOrder::kRowSnake: return h * W + ((h % 2 == 0) ? w : W - 1 - w);
    case ScanOrder::kColumnSnake: return w * H + ((w % 2 == 0) ? h : H - 1 - h);
  }
  return 0;
}

ScanOrder as_scan(TraversalOrder::Variant v) {
  switch (v) {
    case TraversalOrder::Variant::kColumnMajor: return ScanOrder::kColumnMajor;
    case TraversalOrder::Variant::kRowSnake: return ScanOrder::kRowSnake;
    case TraversalOrder::Variant::kColumnSnake: return ScanOrder::kColumnSnake;
    default: return ScanOrder::kRowMajor;
  }
}

}  // namespace

std::string_view to_string(ScanOrder order) {
  for (const auto& [o, name] : kScanNames) {
    if (o == order) return name;
  }
  return "row_major";
}

std::string_view to_string(TraversalOrder::Variant variant) {
  if (variant == TraversalOrder::Variant::kPatch) return "patch";
  return to_string(as_scan(variant));
}

std::optional<ScanOrder> parse_scan_order(std::string_view name) {
  for (const auto& [o, n] : kScanNames) {
    if (n == name) return o;
  }
  return std::nullopt;
}

std::optional<TraversalOrder::Variant> parse_traversal_variant(std::string_view name) {
  if (name == "row_major") return TraversalOrder::Variant::kRowMajor;
  if (name == "column_major") return TraversalOrder::Variant::kColumnMajor;
  if (name == "row_snake") return TraversalOrder::Variant::kRowSnake;
  if (name == "column_snake") return TraversalOrder::Variant::kColumnSnake;
  if (name == "patch") return TraversalOrder::Variant::kPatch;
  return std::nullopt;
}

std::string describe(const TraversalOrder& order) {
  if (order.variant != TraversalOrder::Variant::kPatch) {
    return std::string(to_string(order.variant));
  }
  return "patch(" + std::to_string(order.patch_h) + "x" + std::to_string(order.patch_w) + "," +
         std::string(to_string(order.inner)) + "," + std::string(to_string(order.outer)) + ")";
}

Permutation flatten_permutation(int H, int W, const TraversalOrder& order) {
  require(H >= 1 && W >= 1, ErrorKind::kInvalidOrder, "feature map must be at least 1x1");
  const std::int64_t h_total = H;
  const std::int64_t w_total = W;
  Permutation perm;
  perm.forward.resize(static_cast<std::size_t>(h_total * w_total));
  perm.inverse.resize(perm.forward.size());

  if (order.variant == TraversalOrder::Variant::kPatch) {
    require(order.patch_h >= 1 && order.patch_w >= 1, ErrorKind::kInvalidOrder,
            "patch dimensions must be positive");
    require(H % order.patch_h == 0 && W % order.patch_w == 0, ErrorKind::kInvalidOrder,
            "map " + std::to_string(H) + "x" + std::to_string(W) + " not divisible by patch " +
                std::to_string(order.patch_h) + "x" + std::to_string(order.patch_w));
    const std::int64_t ph = order.patch_h;
    const std::int64_t pw = order.patch_w;
    const std::int64_t grid_h = h_total / ph;
    const std::int64_t grid_w = w_total / pw;
    for (std::int64_t h = 0; h < h_total; ++h) {
      for (std::int64_t w = 0; w < w_total; ++w) {
        const std::int64_t block = position(order.outer, grid_h, grid_w, h / ph, w / pw);
        const std::int64_t within = position(order.inner, ph, pw, h % ph, w % pw);
        perm.forward[static_cast<std::size_t>(h * w_total + w)] = block * ph * pw + within;
      }
    }
  } else {
    const ScanOrder scan = as_scan(order.variant);
    for (std::int64_t h = 0; h < h_total; ++h) {
      for (std::int64_t w = 0; w < w_total; ++w) {
        perm.forward[static_cast<std::size_t>(h * w_total + w)] =
            position(scan, h_total, w_total, h, w);
      }
    }
  }
  for (std::size_t i = 0; i < perm.forward.size(); ++i) {
    perm.inverse[static_cast<std::size_t>(perm.forward[i])] = static_cast<std::int64_t>(i);
  }
  return perm;
}

std::int64_t remap_index(std::int64_t idx_row_major, int H, int W, const TraversalOrder& order) {
  const std::int64_t size = static_cast<std::int64_t>(H) * W;
  require(idx_row_major >= 0 && idx_row_major < size, ErrorKind::kRange,
          "index " + std::to_string(idx_row_major) + " outside [0, " + std::to_string(size) + ")");
  if (order.variant == TraversalOrder::Variant::kRowMajor) return idx_row_major;
  return flatten_permutation(H, W, order).forward[static_cast<std::size_t>(idx_row_major)];
}

}  // namespace xbev
