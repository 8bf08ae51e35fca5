// SPDX-License-Identifier: Apache-2.0

#include "xbev/merge.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "xbev/error.hpp"

namespace xbev {

std::vector<std::int64_t> refpoints_to_1d(std::span<const Vec2> hit_points, int H_f, int W_f,
                                          const TraversalOrder& order, std::int64_t shift) {
  require(H_f >= 1 && W_f >= 1, ErrorKind::kShape, "feature map must be at least 1x1");
  const Permutation perm = flatten_permutation(H_f, W_f, order);
  const std::int64_t size = static_cast<std::int64_t>(H_f) * W_f;
  std::vector<std::int64_t> out;
  out.reserve(hit_points.size());
  for (const auto& [u, v] : hit_points) {
    require(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0, ErrorKind::kContract,
            "reference point (" + std::to_string(u) + ", " + std::to_string(v) +
                ") is not a hit");
    const auto row = std::min<std::int64_t>(static_cast<std::int64_t>(std::floor(v * H_f)), H_f - 1);
    const auto col = std::min<std::int64_t>(static_cast<std::int64_t>(std::floor(u * W_f)), W_f - 1);
    const std::int64_t idx = std::clamp<std::int64_t>(W_f * row + col + shift, 0, size - 1);
    out.push_back(perm.forward[static_cast<std::size_t>(idx)]);
  }
  return out;
}

std::vector<std::int64_t> index_offset(std::span<const std::int64_t> r1d, std::int64_t V) {
  for (auto idx : r1d) {
    require(idx >= 0 && idx < V, ErrorKind::kRange,
            "1D reference index " + std::to_string(idx) + " outside [0, " + std::to_string(V) + ")");
  }
  std::vector<std::size_t> order(r1d.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return r1d[a] < r1d[b]; });
  std::vector<std::int64_t> positions(r1d.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    positions[order[rank]] = r1d[order[rank]] + static_cast<std::int64_t>(rank);
  }
  return positions;
}

MergedStream build_merged(const MatrixD& values, const MatrixD& queries,
                          std::span<const std::int64_t> positions,
                          std::span<const std::int64_t> extract_ids) {
  const std::size_t V = values.rows();
  const std::size_t M = queries.rows();
  require(V == 0 || M == 0 || values.cols() == queries.cols(), ErrorKind::kShape,
          "value and query widths differ (" + std::to_string(values.cols()) + " vs " +
              std::to_string(queries.cols()) + ")");
  require(positions.size() == M && extract_ids.size() == M, ErrorKind::kShape,
          "one position and one extract id per query row required");
  const std::size_t width = V > 0 ? values.cols() : queries.cols();
  const std::size_t L = V + M;

  std::vector<std::int64_t> slot_owner(L, -1);
  for (std::size_t i = 0; i < M; ++i) {
    const auto p = positions[i];
    require(p >= 0 && static_cast<std::size_t>(p) < L, ErrorKind::kRange,
            "insert position " + std::to_string(p) + " outside merged stream of length " +
                std::to_string(L));
    require(slot_owner[static_cast<std::size_t>(p)] < 0, ErrorKind::kContract,
            "two query copies share stream position " + std::to_string(p));
    slot_owner[static_cast<std::size_t>(p)] = static_cast<std::int64_t>(i);
  }

  MergedStream out{MatrixD(L, width), {}};
  out.seq.length = L;
  out.seq.s_mask.assign(L, 1);
  std::size_t next_value = 0;
  for (std::size_t s = 0; s < L; ++s) {
    auto dst = out.tokens.row(s);
    if (slot_owner[s] >= 0) {
      const auto i = static_cast<std::size_t>(slot_owner[s]);
      auto src = queries.row(i);
      std::copy(src.begin(), src.end(), dst.begin());
      out.seq.s_mask[s] = 0;
      out.seq.insert_positions.push_back(static_cast<std::int64_t>(s));
      out.seq.extract_index.push_back(extract_ids[i]);
    } else {
      auto src = values.row(next_value++);
      std::copy(src.begin(), src.end(), dst.begin());
    }
  }
  return out;
}

MatrixD filter_stream(const MatrixD& tokens, std::span<const std::uint8_t> s_mask, bool feature) {
  require(s_mask.size() == tokens.rows(), ErrorKind::kShape, "s_mask length mismatch");
  const auto keep = static_cast<std::size_t>(
      std::count(s_mask.begin(), s_mask.end(), feature ? std::uint8_t{1} : std::uint8_t{0}));
  MatrixD out(keep, tokens.cols());
  std::size_t r = 0;
  for (std::size_t s = 0; s < tokens.rows(); ++s) {
    if ((s_mask[s] != 0) == feature) {
      auto src = tokens.row(s);
      std::copy(src.begin(), src.end(), out.row(r++).begin());
    }
  }
  return out;
}

}  // namespace xbev
