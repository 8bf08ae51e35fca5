// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "support.hpp"
#include "xbev/oracles.hpp"
#include "xbev/ssm_core.hpp"
#include "xbev/tolerances.hpp"

namespace xbev {
namespace {

using test::filled;
using test::random_matrix;

SSMParams<double> unit_params(double A_log = 0.0, double dt_bias = 0.0, double skip = 0.0) {
  return {{A_log}, {dt_bias}, {skip}};
}

// N = H = P = 1, A = -1, dt = 0, dt_bias = 0: delta = ln 2 and decay 1/2.
SequenceBatch<double> two_step_seq() {
  const double inv_ln2 = 1.0 / std::numbers::ln2;
  return {filled(2, 1, 1.0), filled(2, 1, inv_ln2), filled(2, 1, 1.0), filled(2, 1, 0.0)};
}

TEST(Discretize, ZeroDtGivesLn2AndHalfDecay) {
  const auto disc = discretize(filled(1, 1, 0.0), unit_params());
  EXPECT_NEAR(disc.delta(0, 0), std::numbers::ln2, 1e-15);
  EXPECT_NEAR(disc.decay(0, 0), 0.5, 1e-15);
}

TEST(Discretize, DecayStaysInUnitIntervalForLargeSteps) {
  CounterRng rng(3);
  MatrixD dt = random_matrix(64, 4, rng, 20.0);
  const auto params = SSMParams<double>::init(4, rng);
  const auto disc = discretize(dt, params);
  for (double a : disc.decay.values()) {
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
  }
  for (double d : disc.delta.values()) EXPECT_GE(d, 0.0);
}

TEST(SSMParams, InitRanges) {
  CounterRng rng(11);
  const auto p = SSMParams<double>::init(8, rng);
  for (std::size_t h = 0; h < 8; ++h) {
    EXPECT_GE(p.A_log[h], 0.0);
    EXPECT_LE(p.A_log[h], std::log(16.0));
    EXPECT_LT(p.A(h), 0.0);
    const double step = softplus(p.dt_bias[h]);
    EXPECT_GE(step, 1e-3 * (1 - 1e-12));
    EXPECT_LE(step, 1e-1 * (1 + 1e-12));
  }
}

TEST(SSMDims, RejectsInconsistentExpand) {
  SSMDims d;
  d.expand = 3.0;
  EXPECT_EQ(test::catch_error([&] { d.validate(); }).kind(), ErrorKind::kInvalidSpec);
  d = SSMDims{};
  d.groups = 3;
  EXPECT_EQ(test::catch_error([&] { d.validate(); }).kind(), ErrorKind::kInvalidSpec);
  EXPECT_NO_THROW(SSMDims{}.validate());
}

TEST(ScanRecurrent, TwoStepHandRecurrence) {
  const SSMDims d = SSMDims::kernel(1, 1, 1);
  const auto r = scan_recurrent(d, two_step_seq(), unit_params(), ScanState<double>::zeros(d));
  ASSERT_EQ(r.y.rows(), 2U);
  EXPECT_NEAR(r.y(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(r.y(1, 0), 1.5, 1e-15);
  EXPECT_NEAR(r.final_state.h[0], 1.5, 1e-15);
}

TEST(ScanRecurrent, ZeroStepKeepsInitialState) {
  const SSMDims d = SSMDims::kernel(1, 1, 1);
  CounterRng rng(5);
  const std::size_t L = 6;
  const SequenceBatch<double> seq{random_matrix(L, 1, rng), random_matrix(L, 1, rng),
                                  random_matrix(L, 1, rng), filled(L, 1, 0.0)};
  Discretization<double> disc{filled(L, 1, 0.0), filled(L, 1, 1.0), filled(L, 1, 0.0)};
  const ScanState<double> init{{2.5}};
  const std::vector<double> skip{0.75};
  const auto r = scan_discretized(d, seq, disc, skip, init);
  for (std::size_t t = 0; t < L; ++t) {
    EXPECT_DOUBLE_EQ(r.y(t, 0), seq.C(t, 0) * 2.5 + 0.75 * seq.x(t, 0));
  }
  EXPECT_EQ(r.final_state, init);
}

TEST(ScanRecurrent, EmptySequenceReturnsInit) {
  const SSMDims d = SSMDims::kernel(2, 2, 3);
  const SequenceBatch<double> seq{MatrixD(0, 4), MatrixD(0, 3), MatrixD(0, 3), MatrixD(0, 2)};
  ScanState<double> init = ScanState<double>::zeros(d);
  init.h[5] = 3.0;
  CounterRng rng(1);
  const auto r = scan_recurrent(d, seq, SSMParams<double>::init(2, rng), init);
  EXPECT_EQ(r.y.rows(), 0U);
  EXPECT_EQ(r.final_state, init);
}

TEST(ScanRecurrent, RejectsShapeMismatch) {
  const SSMDims d = SSMDims::kernel(2, 2, 3);
  const SequenceBatch<double> seq{MatrixD(3, 5), MatrixD(3, 3), MatrixD(3, 3), MatrixD(3, 2)};
  CounterRng rng(1);
  EXPECT_EQ(test::catch_error([&] {
              scan_recurrent(d, seq, SSMParams<double>::init(2, rng), ScanState<double>::zeros(d));
            }).kind(),
            ErrorKind::kShape);
}

TEST(ScanMatrixMixer, MatchesHandRecurrence) {
  const SSMDims d = SSMDims::kernel(1, 1, 1);
  const MatrixD y = scan_matrix_mixer(d, two_step_seq(), unit_params());
  const MatrixD rec = scan_recurrent(d, two_step_seq(), unit_params(), ScanState<double>::zeros(d)).y;
  EXPECT_NEAR(y(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(y(1, 0), 1.5, 1e-15);
  EXPECT_LT(max_abs_diff(y, rec), 1e-12);
}

TEST(ScanMatrixMixer, UnitDecayIsPrefixSum) {
  // A_log -> -inf makes A = -0 and every decay exactly 1.
  const SSMDims d = SSMDims::kernel(1, 1, 1);
  const double dt_for_unit_step = std::log(std::expm1(1.0));
  const auto params = unit_params(-800.0, dt_for_unit_step);
  const double step = softplus(dt_for_unit_step);
  CounterRng rng(9);
  const std::size_t L = 12;
  const SequenceBatch<double> seq{random_matrix(L, 1, rng), filled(L, 1, 1.0 / step),
                                  filled(L, 1, 1.0), filled(L, 1, 0.0)};
  const MatrixD y = scan_matrix_mixer(d, seq, params);
  double prefix = 0.0;
  for (std::size_t t = 0; t < L; ++t) {
    prefix += seq.x(t, 0);
    EXPECT_NEAR(y(t, 0), prefix, 1e-12);
  }
}

TEST(ScanMatrixMixer, SingleToken) {
  const SSMDims d = SSMDims::kernel(2, 3, 4);
  CounterRng rng(21);
  const SequenceBatch<double> seq{random_matrix(1, 6, rng), random_matrix(1, 4, rng),
                                  random_matrix(1, 4, rng), random_matrix(1, 2, rng)};
  auto params = SSMParams<double>::init(2, rng);
  params.skip_D = {0.3, -1.2};
  const MatrixD y = scan_matrix_mixer(d, seq, params);
  const auto disc = discretize(seq.dt, params);
  for (std::size_t c = 0; c < 6; ++c) {
    const std::size_t h = c / 3;
    double cb = 0.0;
    for (std::size_t n = 0; n < 4; ++n) cb += seq.C(0, n) * seq.B(0, n);
    EXPECT_NEAR(y(0, c), cb * disc.delta(0, h) * seq.x(0, c) + params.skip_D[h] * seq.x(0, c),
                1e-14);
  }
}

TEST(ScanMatrixMixer, LongSequenceUsesStableProducts) {
  // Large steps make plain decay products underflow long before L = 300.
  const SSMDims d = SSMDims::kernel(2, 2, 8, 2);
  CounterRng rng(33);
  const std::size_t L = 300;
  const SequenceBatch<double> seq{random_matrix(L, 4, rng), random_matrix(L, 16, rng),
                                  random_matrix(L, 16, rng), filled(L, 2, 6.0)};
  const auto params = SSMParams<double>::init(2, rng);
  const MatrixD mix = scan_matrix_mixer(d, seq, params);
  const MatrixD rec = scan_recurrent(d, seq, params, ScanState<double>::zeros(d)).y;
  EXPECT_TRUE(all_finite<double>(mix.values()));
  EXPECT_LT(max_abs_diff(mix, rec), Tolerances::kScanAbs64);
}

TEST(ScanRecurrent, MatchesDirectSumOracleWithGroups) {
  const SSMDims d = SSMDims::kernel(4, 2, 5, 2);
  CounterRng rng(44);
  const std::size_t L = 40;
  const SequenceBatch<double> seq{random_matrix(L, 8, rng), random_matrix(L, 10, rng),
                                  random_matrix(L, 10, rng), random_matrix(L, 4, rng)};
  const auto params = SSMParams<double>::init(4, rng);
  const MatrixD rec = scan_recurrent(d, seq, params, ScanState<double>::zeros(d)).y;
  EXPECT_LT(max_abs_diff(rec, oracle::ssm_direct_sum(d, seq, params)), 1e-10);
}

TEST(Hydra, PalindromeInPalindromeOut) {
  const SSMDims d = SSMDims::kernel(2, 2, 3);
  CounterRng rng(8);
  const std::size_t L = 9;
  SequenceBatch<double> seq{random_matrix(L, 4, rng), random_matrix(L, 3, rng),
                            random_matrix(L, 3, rng), random_matrix(L, 2, rng)};
  for (MatrixD* m : {&seq.x, &seq.B, &seq.C, &seq.dt}) {
    for (std::size_t t = 0; t < L / 2; ++t) {
      for (std::size_t c = 0; c < m->cols(); ++c) (*m)(L - 1 - t, c) = (*m)(t, c);
    }
  }
  const auto params = SSMParams<double>::init(2, rng);
  const MatrixD y = hydra_bidirectional(d, seq, params, params);
  EXPECT_LT(max_abs_diff(y, reverse_rows(y)), 1e-12);
}

TEST(Hydra, SingleTokenIsMeanSkip) {
  const SSMDims d = SSMDims::kernel(1, 3, 2);
  CounterRng rng(2);
  const SequenceBatch<double> seq{random_matrix(1, 3, rng), random_matrix(1, 2, rng),
                                  random_matrix(1, 2, rng), random_matrix(1, 1, rng)};
  auto fwd = SSMParams<double>::init(1, rng);
  auto bwd = SSMParams<double>::init(1, rng);
  fwd.skip_D = {0.4};
  bwd.skip_D = {1.0};
  const MatrixD y = hydra_bidirectional(d, seq, fwd, bwd);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(y(0, c), 0.7 * seq.x(0, c));
}

TEST(Hydra, MatchesDenseQuasiseparableOracle) {
  const SSMDims d = SSMDims::kernel(2, 3, 4);
  CounterRng rng(16);
  const std::size_t L = 16;
  const SequenceBatch<double> seq{random_matrix(L, 6, rng), random_matrix(L, 4, rng),
                                  random_matrix(L, 4, rng), random_matrix(L, 2, rng)};
  const auto fwd = SSMParams<double>::init(2, rng);
  const auto bwd = SSMParams<double>::init(2, rng);
  EXPECT_LT(max_abs_diff(hydra_bidirectional(d, seq, fwd, bwd), oracle::hydra_dense(d, seq, fwd, bwd)),
            1e-10);
}

TEST(ZohReference, ApproachesEulerForSmallSteps) {
  const double A = -2.0;
  const double B = 0.7;
  // Leading correction is delta^2 * A * B / 2.
  EXPECT_NEAR(zoh_input_gain(1e-6, A, B), 1e-6 * B, 1e-12);
  EXPECT_NEAR(zoh_input_gain(1e-6, A, B), 1e-6 * B + 0.5e-12 * A * B, 1e-17);
  EXPECT_NEAR(zoh_input_gain(0.5, A, B), (std::exp(0.5 * A) - 1.0) / A * B, 1e-15);
}

TEST(ScanRecurrent, Float32TracksFloat64) {
  const SSMDims d = SSMDims::kernel(2, 2, 8);
  CounterRng rng(77);
  const std::size_t L = 64;
  const SequenceBatch<double> seq{random_matrix(L, 4, rng), random_matrix(L, 8, rng),
                                  random_matrix(L, 8, rng), random_matrix(L, 2, rng)};
  const auto params = SSMParams<double>::init(2, rng);
  SSMParams<float> p32;
  for (std::size_t h = 0; h < 2; ++h) {
    p32.A_log.push_back(static_cast<float>(params.A_log[h]));
    p32.dt_bias.push_back(static_cast<float>(params.dt_bias[h]));
    p32.skip_D.push_back(static_cast<float>(params.skip_D[h]));
  }
  const SequenceBatch<float> s32{cast<float>(seq.x), cast<float>(seq.B), cast<float>(seq.C),
                                 cast<float>(seq.dt)};
  const MatrixD y32 = cast<double>(scan_recurrent(d, s32, p32, ScanState<float>::zeros(d)).y);
  const MatrixD y64 = scan_recurrent(d, seq, params, ScanState<double>::zeros(d)).y;
  double scale = 0.0;
  for (double v : y64.values()) scale = std::max(scale, std::abs(v));
  EXPECT_LT(max_abs_diff(y32, y64) / scale, Tolerances::kScanRel32);
}

}  // namespace
}  // namespace xbev
