// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"
#include "xbev/baselines.hpp"
#include "xbev/harness/checks.hpp"
#include "xbev/harness/scene.hpp"
#include "xbev/layer.hpp"

namespace xbev {
namespace {

using test::random_matrix;

SSMDims small_dims() { return SSMDims{8, 2.0, 2, 8, 4, 1}; }

LayerConfig flags_off() {
  LayerConfig c;
  c.dims = small_dims();
  c.zero_BQ = false;
  c.zero_CV = false;
  c.zero_dtQ = false;
  return c;
}

TEST(ProjectInputs, ZeroWeightsGiveZeroOutputs) {
  const LayerConfig c = flags_off();
  LayerParams p = LayerParams::init(c.dims, c.conv_width, 1);
  for (double& w : p.in_proj.weight.values()) w = 0.0;
  for (double& b : p.in_proj.bias) b = 0.0;
  CounterRng rng(2);
  const auto out = project_inputs(random_matrix(3, 8, rng), random_matrix(5, 8, rng), p, c);
  for (const MatrixD* m : {&out.Q_z, &out.Q_xBCdt, &out.V_xBCdt}) {
    for (double v : m->values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(ProjectInputs, UnitBasisReadsWeightColumn) {
  const LayerConfig c = flags_off();
  LayerParams p = LayerParams::init(c.dims, c.conv_width, 3);
  for (double& b : p.in_proj.bias) b = 0.0;
  MatrixD q(1, 8);
  q(0, 5) = 1.0;
  const auto out = project_inputs(q, MatrixD(0, 8), p, c);
  const ProjectionLayout layout(c.dims);
  for (std::size_t j = 0; j < layout.inner; ++j) EXPECT_EQ(out.Q_z(0, j), p.in_proj.weight(j, 5));
  for (std::size_t j = 0; j < layout.token_width(); ++j) {
    EXPECT_EQ(out.Q_xBCdt(0, j), p.in_proj.weight(layout.inner + j, 5));
  }
}

TEST(ProjectInputs, ZeroFlagsClearTheirSlices) {
  LayerConfig c = flags_off();
  c.zero_BQ = true;
  c.zero_CV = true;
  c.zero_dtQ = true;
  const LayerParams p = LayerParams::init(c.dims, c.conv_width, 4);
  CounterRng rng(5);
  const auto out = project_inputs(random_matrix(3, 8, rng), random_matrix(4, 8, rng), p, c);
  const ProjectionLayout L(c.dims);
  auto all_zero = [](const MatrixD& m, std::size_t first, std::size_t count) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
      for (std::size_t j = first; j < first + count; ++j) {
        if (m(r, j) != 0.0) return false;
      }
    }
    return true;
  };
  const std::size_t off = L.inner;  // tokens drop z
  EXPECT_TRUE(all_zero(out.Q_xBCdt, L.B_fwd() - off, L.bc));
  EXPECT_TRUE(all_zero(out.Q_xBCdt, L.B_bwd() - off, L.bc));
  EXPECT_TRUE(all_zero(out.Q_xBCdt, L.dt_fwd() - off, 2 * L.heads));
  EXPECT_TRUE(all_zero(out.V_xBCdt, L.C_fwd() - off, L.bc));
  EXPECT_TRUE(all_zero(out.V_xBCdt, L.C_bwd() - off, L.bc));
  EXPECT_FALSE(all_zero(out.Q_xBCdt, L.C_fwd() - off, L.bc));
  EXPECT_FALSE(all_zero(out.V_xBCdt, L.B_fwd() - off, L.bc));
}

TEST(CausalConv, FirstTokenSeesOnlyLastTap) {
  CounterRng rng(6);
  const MatrixD x = random_matrix(4, 3, rng);
  const MatrixD w = random_matrix(3, 4, rng);
  const std::vector<double> b{0.1, -0.2, 0.3};
  const MatrixD y = causal_depthwise_conv(x, w, b);
  auto silu = [](double v) { return v / (1.0 + std::exp(-v)); };
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_NEAR(y(0, c), silu(b[c] + w(c, 3) * x(0, c)), 1e-15);
    const double full = b[c] + w(c, 0) * x(0, c) + w(c, 1) * x(1, c) + w(c, 2) * x(2, c) + w(c, 3) * x(3, c);
    EXPECT_NEAR(y(3, c), silu(full), 1e-14);
  }
}

TEST(GatedRms, PlainAndNormalized) {
  const std::vector<double> y{1.0, -2.0, 0.5};
  const std::vector<double> z{0.0, 1.0, 2.0};
  const std::vector<double> g{1.0, 2.0, 3.0};
  auto silu = [](double v) { return v / (1.0 + std::exp(-v)); };
  const auto plain = gated_rms(y, z, g, false);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(plain[i], y[i] * silu(z[i]) * g[i]);
  const auto normed = gated_rms(y, z, std::vector<double>(3, 1.0), true);
  double ms = 0.0;
  for (double v : normed) ms += v * v / 3.0;
  EXPECT_NEAR(ms, 1.0, 1e-4);
}

TEST(LayerNorm, ZeroMeanUnitVariance) {
  const std::vector<double> x{1.0, 2.0, 4.0, 9.0};
  const auto y = layer_norm(x, std::vector<double>(4, 1.0), std::vector<double>(4, 0.0));
  double mean = 0.0;
  double var = 0.0;
  for (double v : y) mean += v / 4.0;
  for (double v : y) var += (v - mean) * (v - mean) / 4.0;
  EXPECT_NEAR(mean, 0.0, 1e-12);
  EXPECT_NEAR(var, 1.0, 1e-5);
}

TEST(InsertionBaselines, AppendAndPrependMasks) {
  CounterRng rng(7);
  const MatrixD v = random_matrix(3, 2, rng);
  const MatrixD q = random_matrix(2, 2, rng);
  const std::vector<std::int64_t> ids{4, 1};
  EXPECT_EQ(insertion_baselines(v, q, ids, InsertionMode::kAppend).seq.s_mask,
            (std::vector<std::uint8_t>{1, 1, 1, 0, 0}));
  EXPECT_EQ(insertion_baselines(v, q, ids, InsertionMode::kPrepend).seq.s_mask,
            (std::vector<std::uint8_t>{0, 0, 1, 1, 1}));
  EXPECT_EQ(test::catch_error([&] { insertion_baselines(v, q, ids, InsertionMode::kProject); }).kind(),
            ErrorKind::kContract);
}

TEST(InsertionBaselines, AppendForwardReadoutIsNaiveCrossAttention) {
  const std::size_t V = 6;
  const SSMDims d = SSMDims::kernel(2, 2, static_cast<int>(V));
  CounterRng rng(8);
  const auto params = DirectionalParams::init(2, rng);
  const MatrixD vx = random_matrix(V, 4, rng);
  const MatrixD vB = random_matrix(V, V, rng);
  const MatrixD vdt = random_matrix(V, 2, rng);
  const MatrixD qC = random_matrix(2, V, rng);
  // Stream tokens: [x | B | C | dt]; queries carry only C.
  const std::size_t width = 4 + 2 * V + 2;
  MatrixD values(V, width);
  MatrixD queries(2, width);
  for (std::size_t t = 0; t < V; ++t) {
    for (std::size_t j = 0; j < 4; ++j) values(t, j) = vx(t, j);
    for (std::size_t n = 0; n < V; ++n) values(t, 4 + n) = vB(t, n);
    for (std::size_t h = 0; h < 2; ++h) values(t, 4 + 2 * V + h) = vdt(t, h);
  }
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t n = 0; n < V; ++n) queries(i, 4 + V + n) = qC(i, n);
  }
  const std::vector<std::int64_t> ids{0, 1};
  const MergedStream s = insertion_baselines(values, queries, ids, InsertionMode::kAppend);
  auto cols = [&](std::size_t first, std::size_t count) { return slice_cols(s.tokens, first, count); };
  const XqssmInput in = XqssmInput::bidirectional(cols(0, 4), cols(4, V), cols(4 + V, V),
                                                  cols(4 + 2 * V, 2), cols(4, V), cols(4 + V, V),
                                                  cols(4 + 2 * V, 2), s.seq.s_mask);
  XqssmOptions fwd_only;
  fwd_only.backward = false;
  const MatrixD y = xqssm_recurrent(d, in, params, fwd_only);
  const MatrixD naive =
      naive_mamba_xattn(d, SequenceBatch<double>{vx, vB, MatrixD(V, V), vdt}, params.fwd, qC);
  EXPECT_LT(max_abs_diff(y, naive), 1e-12);
}

TEST(InsertionBaselines, AppendWithZeroValuesReadsNothing) {
  const SSMDims d = SSMDims::kernel(1, 2, 3);
  CounterRng rng(9);
  const std::size_t L = 5;
  std::vector<std::uint8_t> mask{1, 1, 1, 0, 0};
  const XqssmInput in = XqssmInput::bidirectional(
      MatrixD(L, 2), random_matrix(L, 3, rng), random_matrix(L, 3, rng), random_matrix(L, 1, rng),
      random_matrix(L, 3, rng), random_matrix(L, 3, rng), random_matrix(L, 1, rng), mask);
  const MatrixD y = xqssm_recurrent(d, in, DirectionalParams::init(1, rng));
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

class SmokeLayer : public ::testing::Test {
 protected:
  void SetUp() override {
    scene = harness::generate_scene(harness::smoke_scene_options(31));
    config = harness::smoke_layer_config();
    params = LayerParams::init(config.dims, config.conv_width, 31);
    refs = build_reference_points(scene.spec.bev, scene.spec.cameras);
  }
  harness::LoadedScene scene;
  LayerConfig config;
  LayerParams params;
  ReferencePointSet refs;
};

TEST_F(SmokeLayer, ZeroHitQueryKeepsNormalizedResidual) {
  LayerTrace trace;
  const MatrixD out = spatial_cross_mamba_forward(scene.queries, scene.features, refs, params, config, &trace);
  std::size_t zero_hit = 0;
  for (std::size_t q = 0; q < refs.queries; ++q) {
    if (refs.hits_of_query(q) != 0) continue;
    ++zero_hit;
    const auto expect = layer_norm(scene.queries.row(q), params.norm_gain, params.norm_bias);
    for (std::size_t j = 0; j < expect.size(); ++j) EXPECT_EQ(out(q, j), expect[j]);
    for (double v : trace.q_y.row(q)) EXPECT_EQ(v, 0.0);
  }
  EXPECT_GT(zero_hit, 0U);
}

TEST_F(SmokeLayer, ZeroOutProjectionGivesNormalizedInput) {
  for (double& w : params.out_proj.weight.values()) w = 0.0;
  const MatrixD out = spatial_cross_mamba_forward(scene.queries, scene.features, refs, params, config);
  for (std::size_t q = 0; q < refs.queries; ++q) {
    const auto expect = layer_norm(scene.queries.row(q), params.norm_gain, params.norm_bias);
    for (std::size_t j = 0; j < expect.size(); ++j) EXPECT_EQ(out(q, j), expect[j]);
  }
}

TEST_F(SmokeLayer, NonFiniteInputNamesStage) {
  scene.queries(3, 2) = NAN;
  const Error e = test::catch_error(
      [&] { spatial_cross_mamba_forward(scene.queries, scene.features, refs, params, config); });
  EXPECT_EQ(e.kind(), ErrorKind::kNumeric);
  EXPECT_EQ(e.detail(), "project");
}

TEST_F(SmokeLayer, TraceCountsCopies) {
  LayerTrace trace;
  spatial_cross_mamba_forward(scene.queries, scene.features, refs, params, config, &trace);
  EXPECT_EQ(trace.streams, scene.features.size() * config.traversals.size());
  EXPECT_EQ(trace.copies, refs.total_hits() * config.traversals.size());
  EXPECT_GT(trace.xqssm_units, 0U);
}

TEST_F(SmokeLayer, NormModesDiffer) {
  std::vector<MatrixD> outs;
  for (auto m : {NormMode::kAverage, NormMode::kRmsNorm, NormMode::kBoth, NormMode::kNeither}) {
    config.norm_mode = m;
    outs.push_back(spatial_cross_mamba_forward(scene.queries, scene.features, refs, params, config));
    EXPECT_TRUE(all_finite<double>(outs.back().values()));
  }
  for (std::size_t a = 0; a < outs.size(); ++a) {
    for (std::size_t b = a + 1; b < outs.size(); ++b) EXPECT_NE(outs[a], outs[b]);
  }
}

TEST(LayerChecks, DuplicationAndConvIsolation) {
  EXPECT_TRUE(harness::check_duplication_invariance(5).passed);
  EXPECT_TRUE(harness::check_after_conv_isolation(5).passed);
  EXPECT_TRUE(harness::check_zero_hit_independence(5).passed);
}

TEST(LayerConfig, RejectsEmptyTraversals) {
  LayerConfig c;
  c.traversals.clear();
  EXPECT_EQ(test::catch_error([&] { c.validate(); }).kind(), ErrorKind::kConfig);
  c = LayerConfig{};
  c.dropout = 1.0;
  EXPECT_EQ(test::catch_error([&] { c.validate(); }).kind(), ErrorKind::kConfig);
}

TEST(Hydra, ZeroOutProjectionIsIdentity) {
  const SSMDims d = small_dims();
  HydraParams p = HydraParams::init(d, 4, 10);
  for (double& w : p.out_proj.weight.values()) w = 0.0;
  CounterRng rng(11);
  const MatrixD grid = random_matrix(12, 8, rng);
  EXPECT_EQ(hydra_self_attention(grid, 3, 4, d, p), grid);
}

TEST(Hydra, SingleCellAndOrderSensitivity) {
  const SSMDims d = small_dims();
  const HydraParams p = HydraParams::init(d, 4, 12);
  CounterRng rng(13);
  const MatrixD one = random_matrix(1, 8, rng);
  const MatrixD y1 = hydra_self_attention(one, 1, 1, d, p);
  EXPECT_TRUE(all_finite<double>(y1.values()));
  EXPECT_NE(y1, one);
  const MatrixD grid = random_matrix(12, 8, rng);
  EXPECT_GT(max_abs_diff(hydra_self_attention(grid, 3, 4, d, p, TraversalOrder::row_major()),
                         hydra_self_attention(grid, 3, 4, d, p, TraversalOrder::column_major())),
            1e-9);
}

}  // namespace
}  // namespace xbev
