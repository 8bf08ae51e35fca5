// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "support.hpp"
#include "xbev/merge.hpp"
#include "xbev/oracles.hpp"

namespace xbev {
namespace {

using test::random_matrix;

TEST(RefpointsTo1d, Examples) {
  const std::vector<Vec2> pts{{0.6, 0.4}, {0.0, 0.0}, {1.0, 1.0}};
  EXPECT_EQ(refpoints_to_1d(pts, 3, 4, TraversalOrder::row_major()),
            (std::vector<std::int64_t>{6, 0, 11}));
}

TEST(RefpointsTo1d, AppliesTraversalAndShift) {
  const std::vector<Vec2> pts{{0.1, 0.9}};  // row 2, col 0 of a 3 x 4 map
  EXPECT_EQ(refpoints_to_1d(pts, 3, 4, TraversalOrder::row_snake()), (std::vector<std::int64_t>{8}));
  EXPECT_EQ(refpoints_to_1d(pts, 3, 4, TraversalOrder::column_major()), (std::vector<std::int64_t>{2}));
  EXPECT_EQ(refpoints_to_1d(pts, 3, 4, TraversalOrder::row_major(), -5),
            (std::vector<std::int64_t>{3}));
  // Shifts clamp to the map.
  EXPECT_EQ(refpoints_to_1d(pts, 3, 4, TraversalOrder::row_major(), 100),
            (std::vector<std::int64_t>{11}));
}

TEST(RefpointsTo1d, RejectsPointsOutsideImage) {
  const std::vector<Vec2> pts{{1.01, 0.5}};
  EXPECT_EQ(test::catch_error([&] { refpoints_to_1d(pts, 3, 4, TraversalOrder::row_major()); }).kind(),
            ErrorKind::kContract);
}

TEST(IndexOffset, Examples) {
  EXPECT_EQ(index_offset(std::vector<std::int64_t>{5, 2, 5}, 8), (std::vector<std::int64_t>{6, 2, 7}));
  EXPECT_EQ(index_offset(std::vector<std::int64_t>{0}, 1), (std::vector<std::int64_t>{0}));
  EXPECT_EQ(index_offset(std::vector<std::int64_t>{0, 1, 2}, 3), (std::vector<std::int64_t>{0, 2, 4}));
}

TEST(IndexOffset, RejectsIndexBeyondValues) {
  EXPECT_EQ(test::catch_error([] { index_offset(std::vector<std::int64_t>{4}, 4); }).kind(),
            ErrorKind::kRange);
}

TEST(BuildMerged, MaskExample) {
  CounterRng rng(1);
  const MatrixD values = random_matrix(4, 3, rng);
  const MatrixD queries = random_matrix(2, 3, rng);
  const std::vector<std::int64_t> pos{1, 4};
  const std::vector<std::int64_t> ids{7, 9};
  const MergedStream s = build_merged(values, queries, pos, ids);
  EXPECT_EQ(s.seq.s_mask, (std::vector<std::uint8_t>{1, 0, 1, 1, 0, 1}));
  EXPECT_EQ(s.seq.extract_index, ids);
  EXPECT_EQ(filter_stream(s.tokens, s.seq.s_mask, true), values);
  EXPECT_EQ(filter_stream(s.tokens, s.seq.s_mask, false), queries);
}

TEST(BuildMerged, EmptySides) {
  CounterRng rng(2);
  const MatrixD values = random_matrix(3, 2, rng);
  const MergedStream none = build_merged(values, MatrixD(0, 2), {}, {});
  EXPECT_EQ(none.tokens, values);
  EXPECT_EQ(none.seq.s_mask, (std::vector<std::uint8_t>{1, 1, 1}));

  const MatrixD q = random_matrix(1, 2, rng);
  const std::vector<std::int64_t> pos{0};
  const MergedStream only = build_merged(MatrixD(0, 2), q, pos, pos);
  EXPECT_EQ(only.tokens, q);
  EXPECT_EQ(only.seq.s_mask, (std::vector<std::uint8_t>{0}));
}

TEST(BuildMerged, RejectsCollidingPositions) {
  CounterRng rng(3);
  const std::vector<std::int64_t> pos{1, 1};
  const std::vector<std::int64_t> ids{0, 1};
  EXPECT_EQ(test::catch_error([&] {
              build_merged(random_matrix(3, 2, rng), random_matrix(2, 2, rng), pos, ids);
            }).kind(),
            ErrorKind::kContract);
}

TEST(BuildMerged, MatchesNaiveInsertionWithTies) {
  CounterRng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t V = 1 + rng.below(20);
    const std::size_t M = rng.below(12);
    const MatrixD values = random_matrix(V, 2, rng);
    const MatrixD queries = random_matrix(M, 2, rng);
    std::vector<std::int64_t> r1d(M);
    std::vector<std::int64_t> ids(M);
    for (std::size_t i = 0; i < M; ++i) {
      r1d[i] = static_cast<std::int64_t>(rng.below(std::min<std::size_t>(V, 4)));
      ids[i] = static_cast<std::int64_t>(i);
    }
    const auto pos = index_offset(r1d, static_cast<std::int64_t>(V));
    const MergedStream got = build_merged(values, queries, pos, ids);
    const MergedStream want = oracle::naive_insert(values, queries, r1d, ids);
    EXPECT_EQ(got.tokens, want.tokens);
    EXPECT_EQ(got.seq.s_mask, want.seq.s_mask);
    EXPECT_EQ(got.seq.insert_positions, want.seq.insert_positions);
    EXPECT_EQ(got.seq.extract_index, want.seq.extract_index);
  }
}

}  // namespace
}  // namespace xbev
