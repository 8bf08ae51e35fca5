// SPDX-License-Identifier: Apache-2.0
//
// Position-aware merge: interleave query copies into a flattened feature
// sequence so that each copy sits immediately before the feature token its
// reference point lands on.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "xbev/geometry.hpp"
#include "xbev/matrix.hpp"
#include "xbev/traversal.hpp"

namespace xbev {

struct MergedSequence {
  std::size_t length = 0;               // V + M
  std::vector<std::uint8_t> s_mask;     // 1 = feature token, 0 = query copy
  std::vector<std::int64_t> insert_positions;  // stream positions of query copies, ascending
  std::vector<std::int64_t> extract_index;     // BEV query id of each copy, same order

  std::size_t values() const noexcept { return length - insert_positions.size(); }
  std::size_t queries() const noexcept { return insert_positions.size(); }
};

struct MergedStream {
  MatrixD tokens;  // (V + M) x width
  MergedSequence seq;
};

// Sequence index of the feature token under each hit point:
//   row = min(floor(v * H_f), H_f - 1), col = min(floor(u * W_f), W_f - 1),
//   idx = remap(W_f * row + col + shift) with the row-major index clamped
//   to [0, H_f * W_f) after the shift.
// Throws kContract when a point lies outside [0, 1]^2.
std::vector<std::int64_t> refpoints_to_1d(std::span<const Vec2> hit_points, int H_f, int W_f,
                                          const TraversalOrder& order, std::int64_t shift = 0);

// position_i = r1d_i + rank_i where rank is the stable ascending rank of r1d_i
// (ties keep input order). Returned in input order.
std::vector<std::int64_t> index_offset(std::span<const std::int64_t> r1d, std::int64_t V);

// Places query row i at positions[i] and fills the remaining slots with the
// values in order. `extract_ids[i]` is the BEV query id of query row i.
MergedStream build_merged(const MatrixD& values, const MatrixD& queries,
                          std::span<const std::int64_t> positions,
                          std::span<const std::int64_t> extract_ids);

// Tokens where s_mask equals `feature`, in stream order.
MatrixD filter_stream(const MatrixD& tokens, std::span<const std::uint8_t> s_mask, bool feature);

}  // namespace xbev
