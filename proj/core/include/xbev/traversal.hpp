// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace xbev {

enum class ScanOrder { kRowMajor, kColumnMajor, kRowSnake, kColumnSnake };

// Flattening order for an H x W map. `patch` tiles the map into
// patch_h x patch_w blocks, flattens each block with `inner` and concatenates
// the blocks in the order given by `outer` over the block grid.
struct TraversalOrder {
  enum class Variant { kRowMajor, kColumnMajor, kRowSnake, kColumnSnake, kPatch };

  Variant variant = Variant::kRowSnake;
  int patch_h = 1;
  int patch_w = 1;
  ScanOrder inner = ScanOrder::kRowMajor;
  ScanOrder outer = ScanOrder::kRowMajor;

  static TraversalOrder row_major() { return {Variant::kRowMajor}; }
  static TraversalOrder column_major() { return {Variant::kColumnMajor}; }
  static TraversalOrder row_snake() { return {Variant::kRowSnake}; }
  static TraversalOrder column_snake() { return {Variant::kColumnSnake}; }
  static TraversalOrder patch(int patch_h, int patch_w, ScanOrder inner, ScanOrder outer) {
    return {Variant::kPatch, patch_h, patch_w, inner, outer};
  }

  bool operator==(const TraversalOrder&) const = default;
};

std::string_view to_string(ScanOrder order);
std::string_view to_string(TraversalOrder::Variant variant);
std::optional<ScanOrder> parse_scan_order(std::string_view name);
std::optional<TraversalOrder::Variant> parse_traversal_variant(std::string_view name);
// Compact label, e.g. "row_snake" or "patch(2x2,row_snake,column_major)".
std::string describe(const TraversalOrder& order);

struct Permutation {
  // forward[row_major_index] = sequence position; inverse is its inverse.
  std::vector<std::int64_t> forward;
  std::vector<std::int64_t> inverse;
};

Permutation flatten_permutation(int H, int W, const TraversalOrder& order);

std::int64_t remap_index(std::int64_t idx_row_major, int H, int W, const TraversalOrder& order);

}  // namespace xbev
