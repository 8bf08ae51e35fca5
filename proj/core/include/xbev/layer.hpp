// SPDX-License-Identifier: Apache-2.0
//
// Spatial cross-Mamba layer: BEV queries attend to multi-camera feature maps
// through position-aware merged streams and the XQSSM kernel. Also the
// row-major Hydra block used as BEV self-attention.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xbev/geometry.hpp"
#include "xbev/matrix.hpp"
#include "xbev/merge.hpp"
#include "xbev/ssm_core.hpp"
#include "xbev/traversal.hpp"
#include "xbev/xqssm.hpp"

namespace xbev {

enum class MergeOrder { kBeforeConv, kAfterConv };
enum class ExtractOrder { kBeforeGate, kAfterGate };
enum class NormMode { kAverage, kRmsNorm, kBoth, kNeither };
enum class InsertionMode { kProject, kAppend, kPrepend };

std::string_view to_string(MergeOrder v);
std::string_view to_string(ExtractOrder v);
std::string_view to_string(NormMode v);
std::string_view to_string(InsertionMode v);

struct LayerConfig {
  SSMDims dims;
  MergeOrder merge_order = MergeOrder::kAfterConv;
  ExtractOrder extract_order = ExtractOrder::kBeforeGate;
  bool zero_BQ = true;
  bool zero_CV = true;
  bool zero_dtQ = true;
  NormMode norm_mode = NormMode::kBoth;
  std::vector<TraversalOrder> traversals{TraversalOrder::row_snake()};
  InsertionMode insertion_mode = InsertionMode::kProject;
  int conv_width = 4;
  double dropout = 0.0;
  // Row-major offset applied to each reference index before insertion.
  std::int64_t insert_shift = 0;
  std::uint64_t dropout_seed = 0;

  void validate() const;
  bool operator==(const LayerConfig&) const = default;
};

struct Linear {
  MatrixD weight;             // out x in
  std::vector<double> bias;   // out, may be empty (no bias)

  std::size_t in_features() const noexcept { return weight.cols(); }
  std::size_t out_features() const noexcept { return weight.rows(); }
  MatrixD apply(const MatrixD& input) const;
  static Linear init(std::size_t in, std::size_t out, bool with_bias, CounterRng& rng);
};

// Channel layout of the in-projection output:
//   [ z : inner | x : inner | B_fwd, C_fwd, B_bwd, C_bwd : 4NG | dt_fwd, dt_bwd : 2H ]
struct ProjectionLayout {
  std::size_t inner = 0;
  std::size_t bc = 0;      // N * G
  std::size_t heads = 0;

  explicit ProjectionLayout(const SSMDims& dims);
  std::size_t z() const noexcept { return 0; }
  std::size_t x() const noexcept { return inner; }
  std::size_t B_fwd() const noexcept { return 2 * inner; }
  std::size_t C_fwd() const noexcept { return 2 * inner + bc; }
  std::size_t B_bwd() const noexcept { return 2 * inner + 2 * bc; }
  std::size_t C_bwd() const noexcept { return 2 * inner + 3 * bc; }
  std::size_t dt_fwd() const noexcept { return 2 * inner + 4 * bc; }
  std::size_t dt_bwd() const noexcept { return 2 * inner + 4 * bc + heads; }
  std::size_t width() const noexcept { return 2 * inner + 4 * bc + 2 * heads; }
  // Token width after z is dropped: [x | BC | dt].
  std::size_t token_width() const noexcept { return inner + 4 * bc + 2 * heads; }
  std::size_t conv_channels() const noexcept { return inner + 4 * bc; }
};

struct LayerParams {
  Linear in_proj;                    // D -> 2 inner + 4NG + 2H, with bias
  MatrixD conv_weight;               // (inner + 4NG) x conv_width
  std::vector<double> conv_bias;     // inner + 4NG
  Linear out_proj;                   // inner -> D, no bias
  std::vector<double> rms_gain;      // inner
  std::vector<double> norm_gain;     // D
  std::vector<double> norm_bias;     // D
  DirectionalParams ssm;

  static LayerParams init(const SSMDims& dims, int conv_width, std::uint64_t seed);
  void validate(const SSMDims& dims, int conv_width) const;
};

struct ProjectedInputs {
  MatrixD Q_z;       // Q x inner
  MatrixD Q_xBCdt;   // Q x token_width
  MatrixD V_xBCdt;   // V x token_width
};

ProjectedInputs project_inputs(const MatrixD& q, const MatrixD& v, const LayerParams& params,
                               const LayerConfig& config);

struct FeatureMap {
  int H_f = 0;
  int W_f = 0;
  MatrixD values;  // (H_f * W_f) x D, row-major cells

  std::size_t cells() const noexcept { return static_cast<std::size_t>(H_f) * W_f; }
};

// features[camera][level]
using CameraFeatures = std::vector<std::vector<FeatureMap>>;

struct LayerTrace {
  std::size_t streams = 0;
  std::size_t copies = 0;
  std::uint64_t xqssm_units = 0;
  std::uint64_t xqssm_formula_total = 0;
  std::vector<std::size_t> copies_per_query;
  double norm_projected = 0.0;
  double norm_gated = 0.0;
  double norm_accumulated = 0.0;
  double norm_update = 0.0;
  double norm_output = 0.0;
  MatrixD q_y;  // accumulated (and averaged) gated outputs, Q x inner
};

// Depthwise causal convolution (left zero padding) followed by SiLU.
MatrixD causal_depthwise_conv(const MatrixD& tokens, const MatrixD& weight,
                              std::span<const double> bias);

// RMSNorm(y * silu(z)) * gain when `normalize`, else (y * silu(z)) * gain.
std::vector<double> gated_rms(std::span<const double> y, std::span<const double> z,
                              std::span<const double> gain, bool normalize);

std::vector<double> layer_norm(std::span<const double> x, std::span<const double> gain,
                               std::span<const double> bias);

// Streams of the naive insertion baselines: all query rows after (append) or
// before (prepend) the flattened features of one camera.
MergedStream insertion_baselines(const MatrixD& values, const MatrixD& queries,
                                 std::span<const std::int64_t> extract_ids, InsertionMode mode);

// One (camera, level, traversal) stream ready for the XQSSM: `values` are the
// projected feature tokens already in traversal order, `queries` the projected
// query copies with their hit coordinates and BEV ids. Applies the convolution
// per config.merge_order, merges per config.insertion_mode and re-applies the
// zero flags to the SSM-facing slices.
MergedStream prepare_stream(const MatrixD& values, const MatrixD& queries,
                            std::span<const Vec2> uv, std::span<const std::int64_t> ids, int H_f,
                            int W_f, const TraversalOrder& order, const LayerParams& params,
                            const LayerConfig& config);

MatrixD spatial_cross_mamba_forward(const MatrixD& q, const CameraFeatures& features,
                                    const ReferencePointSet& refs, const LayerParams& params,
                                    const LayerConfig& config, LayerTrace* trace = nullptr);

struct HydraParams {
  Linear in_proj;                  // D -> 2 inner + 2NG + H, with bias
  MatrixD conv_weight;             // (inner + 2NG) x conv_width
  std::vector<double> conv_bias;
  Linear out_proj;                 // inner -> D, no bias
  std::vector<double> rms_gain;
  SSMParams<double> fwd;
  SSMParams<double> bwd;

  static HydraParams init(const SSMDims& dims, int conv_width, std::uint64_t seed);
};

// Flattens the grid with `order` (row-major by default), applies the Hydra
// block with a plain residual, and restores the grid layout.
MatrixD hydra_self_attention(const MatrixD& grid, int H_bev, int W_bev, const SSMDims& dims,
                             const HydraParams& params,
                             const TraversalOrder& order = TraversalOrder::row_major());

}  // namespace xbev
