// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "support.hpp"
#include "xbev/oracles.hpp"
#include "xbev/xqssm.hpp"

namespace xbev {
namespace {

using test::filled;
using test::random_matrix;

DirectionalParams unit_params() {
  const SSMParams<double> p{{0.0}, {0.0}, {0.0}};
  return {p, p};
}

XqssmInput scalar_stream(std::vector<std::uint8_t> mask) {
  const std::size_t L = mask.size();
  const double inv_ln2 = 1.0 / std::numbers::ln2;
  return XqssmInput::bidirectional(filled(L, 1, 1.0), filled(L, 1, inv_ln2), filled(L, 1, 1.0),
                                   filled(L, 1, 0.0), filled(L, 1, inv_ln2), filled(L, 1, 1.0),
                                   filled(L, 1, 0.0), std::move(mask));
}

XqssmInput random_input(const SSMDims& d, std::vector<std::uint8_t> mask, CounterRng& rng) {
  const std::size_t L = mask.size();
  const auto inner = static_cast<std::size_t>(d.inner());
  const auto bc = static_cast<std::size_t>(d.bc_width());
  const auto H = static_cast<std::size_t>(d.heads);
  return XqssmInput::bidirectional(random_matrix(L, inner, rng), random_matrix(L, bc, rng),
                                   random_matrix(L, bc, rng), random_matrix(L, H, rng),
                                   random_matrix(L, bc, rng), random_matrix(L, bc, rng),
                                   random_matrix(L, H, rng), std::move(mask));
}

TEST(XqssmRecurrent, ForwardHandRecurrence) {
  const SSMDims d = SSMDims::kernel(1, 1, 1);
  XqssmOptions fwd_only;
  fwd_only.backward = false;
  const MatrixD y = xqssm_recurrent(d, scalar_stream({1, 1, 0}), unit_params(), fwd_only);
  ASSERT_EQ(y.rows(), 1U);
  EXPECT_NEAR(y(0, 0), 1.5, 1e-15);
}

TEST(XqssmRecurrent, LeadingQueryReadsZeroForward) {
  const SSMDims d = SSMDims::kernel(1, 1, 1);
  XqssmOptions fwd_only;
  fwd_only.backward = false;
  const MatrixD y = xqssm_recurrent(d, scalar_stream({0, 1, 1}), unit_params(), fwd_only);
  EXPECT_EQ(y(0, 0), 0.0);
  // The backward direction sees both values before the query.
  XqssmOptions bwd_only;
  bwd_only.forward = false;
  EXPECT_NEAR(xqssm_recurrent(d, scalar_stream({0, 1, 1}), unit_params(), bwd_only)(0, 0), 1.5,
              1e-15);
}

TEST(XqssmRecurrent, AllQueryStreamIsZero) {
  const SSMDims d = SSMDims::kernel(2, 2, 3);
  CounterRng rng(1);
  const auto in = random_input(d, std::vector<std::uint8_t>(5, 0), rng);
  const MatrixD y = xqssm_recurrent(d, in, DirectionalParams::init(2, rng));
  ASSERT_EQ(y.rows(), 5U);
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(XqssmRecurrent, StateUnchangedAcrossQueries) {
  const SSMDims d = SSMDims::kernel(2, 2, 4);
  CounterRng rng(2);
  const auto in = random_input(d, {1, 0, 0, 1, 0, 1, 1, 0}, rng);
  std::size_t seen = 0;
  XqssmOptions opts;
  opts.observer = [&](const TokenEvent& e) {
    if (!e.is_query) return;
    ++seen;
    EXPECT_TRUE(std::equal(e.state_before.begin(), e.state_before.end(), e.state_after.begin()));
  };
  xqssm_recurrent(d, in, DirectionalParams::init(2, rng), opts);
  EXPECT_EQ(seen, 8U);
}

TEST(XqssmParallel, MatchesRecurrentAndGenericScan) {
  const SSMDims d = SSMDims::kernel(4, 2, 8, 2);
  CounterRng rng(48);
  std::vector<std::uint8_t> mask(48, 1);
  for (std::size_t i = 0; i < 8; ++i) mask[3 + 5 * i] = 0;
  const auto in = random_input(d, mask, rng);
  const auto params = DirectionalParams::init(4, rng);
  const MatrixD rec = xqssm_recurrent(d, in, params);
  EXPECT_EQ(rec.rows(), 8U);
  EXPECT_LT(max_abs_diff(xqssm_parallel(d, in, params), rec), 1e-10);
  EXPECT_LT(max_abs_diff(oracle::xqssm_generic_scan(d, in, params), rec), 1e-10);
}

TEST(XqssmParallel, NoQueriesGivesEmptyOutput) {
  const SSMDims d = SSMDims::kernel(1, 2, 2);
  CounterRng rng(3);
  const auto in = random_input(d, {1, 1, 1}, rng);
  EXPECT_EQ(xqssm_parallel(d, in, DirectionalParams::init(1, rng)).rows(), 0U);
}

TEST(XqssmInput, RejectsMismatchedDirections) {
  const SSMDims d = SSMDims::kernel(1, 2, 2);
  CounterRng rng(4);
  auto in = random_input(d, {1, 0, 1}, rng);
  in.x[1] = MatrixD(2, 2);
  EXPECT_EQ(test::catch_error([&] { in.validate(d); }).kind(), ErrorKind::kShape);
}

TEST(XqssmFlops, Examples) {
  EXPECT_EQ(xqssm_flops(10, 3, 2, 4, 8).total, 1008U);
  EXPECT_EQ(xqssm_flops(10, 0, 2, 4, 8).total, 2U * 10 * (2 * 5 + 8 * 4));
  EXPECT_EQ(xqssm_flops(0, 3, 2, 4, 8).total, 3U * 8 * 7);
  EXPECT_EQ(xqssm_flops(10, 3, 2, 4, 8).per_query, 8U * 7);
  EXPECT_EQ(xqssm_flops(10, 3, 2, 4, 8).per_feature, 2U * 2 * 5 + 2U * 8 * 4);
}

TEST(XqssmCounters, ValueTermMatchesFormulaExactly) {
  const SSMDims d = SSMDims::kernel(2, 4, 4);
  CounterRng rng(5);
  const auto in = random_input(d, std::vector<std::uint8_t>(10, 1), rng);
  XqssmCounters counters;
  XqssmOptions opts;
  opts.counters = &counters;
  xqssm_recurrent(d, in, DirectionalParams::init(2, rng), opts);
  EXPECT_EQ(counters.total(), xqssm_flops(10, 0, 2, 4, 8).total);
}

TEST(XqssmCounters, QueryReadoutCountsBothDirections) {
  const SSMDims d = SSMDims::kernel(2, 4, 4);
  CounterRng rng(6);
  const auto in = random_input(d, {0, 0, 0}, rng);
  XqssmCounters counters;
  XqssmOptions opts;
  opts.counters = &counters;
  xqssm_recurrent(d, in, DirectionalParams::init(2, rng), opts);
  EXPECT_EQ(counters.readout_macs, 3U * 2 * 8 * 4);
  EXPECT_EQ(counters.state_updates, 0U);
}

TEST(XqssmCounters, AuxiliaryMemoryIndependentOfLength) {
  const SSMDims d = SSMDims::kernel(2, 4, 4);
  CounterRng rng(7);
  const auto params = DirectionalParams::init(2, rng);
  std::vector<std::size_t> peaks;
  for (std::size_t L : {64, 256, 1024}) {
    std::vector<std::uint8_t> mask(L, 1);
    for (std::size_t i = 0; i < L; i += 7) mask[i] = 0;
    XqssmCounters counters;
    XqssmOptions opts;
    opts.counters = &counters;
    xqssm_recurrent(d, random_input(d, mask, rng), params, opts);
    peaks.push_back(counters.peak_aux_bytes);
  }
  EXPECT_GT(peaks[0], 0U);
  EXPECT_EQ(peaks[0], peaks[1]);
  EXPECT_EQ(peaks[1], peaks[2]);
}

}  // namespace
}  // namespace xbev
