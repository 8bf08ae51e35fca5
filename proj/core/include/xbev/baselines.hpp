// SPDX-License-Identifier: Apache-2.0
//
// Reference cross-attention operators and analytic cost estimators for the
// scaling comparison between XQSSM, deformable and dot-product attention.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xbev/geometry.hpp"
#include "xbev/matrix.hpp"
#include "xbev/ssm_core.hpp"

namespace xbev {

// Row-stochastic Q x V matrix softmax(Q K^T / sqrt(D)).
MatrixD attention_weights(const MatrixD& Q, const MatrixD& K);

// softmax(Q K^T / sqrt(D)) Vv, single head.
MatrixD dot_product_xattn(const MatrixD& Q, const MatrixD& K, const MatrixD& Vv);

// Final state over all value tokens, then y_i = C_i . h_T per query row.
// values: x (T x inner), B (T x NG), dt (T x H); C_rows: Q x NG.
MatrixD naive_mamba_xattn(const SSMDims& dims, const SequenceBatch<double>& values,
                          const SSMParams<double>& params, const MatrixD& C_rows);

struct DeformableSamples {
  std::size_t queries = 0;
  std::size_t points = 0;   // reference points per query
  std::size_t offsets = 0;  // sampling offsets per reference point
  std::vector<Vec2> refs;         // queries * points, normalized (u, v)
  std::vector<Vec2> deltas;       // queries * points * offsets, normalized
  std::vector<double> weights;    // queries * points * offsets, rows sum to 1

  std::size_t index(std::size_t q, std::size_t p, std::size_t r) const noexcept {
    return (q * points + p) * offsets + r;
  }
};

// Bilinear sample of a (H_f * W_f) x D row-major map at normalized (u, v).
// Pixel centers sit at ((j + 0.5) / W_f, (i + 0.5) / H_f); taps outside the
// map read zero.
std::vector<double> bilinear_sample(const MatrixD& map, int H_f, int W_f, Vec2 uv);

MatrixD deformable_xattn(const MatrixD& map, int H_f, int W_f, const DeformableSamples& samples);

struct ComplexityConfig {
  std::uint64_t bev_h = 50;
  std::uint64_t bev_w = 50;
  std::uint64_t img_w = 800;
  std::uint64_t img_h = 450;
  std::uint64_t stride = 32;     // feature map is ceil(img / stride)
  std::uint64_t cameras = 6;
  std::uint64_t pillars = 4;     // Z; also the deformable reference points
  std::uint64_t model_dim = 256; // D
  std::uint64_t expand = 2;      // alpha
  std::uint64_t heads = 8;       // H
  std::uint64_t state_dim = 16;  // N
  std::uint64_t groups = 1;
  std::uint64_t conv_width = 4;
  std::uint64_t offsets = 8;     // R
  std::uint64_t attn_heads = 8;  // M_h
  std::uint64_t bytes_per_value = 4;

  std::uint64_t queries() const noexcept { return bev_h * bev_w; }
  std::uint64_t feature_h() const noexcept { return (img_h + stride - 1) / stride; }
  std::uint64_t feature_w() const noexcept { return (img_w + stride - 1) / stride; }
  // Features per camera.
  std::uint64_t values() const noexcept { return feature_h() * feature_w(); }
  // Query copies over all cameras, taken as Z * Q.
  std::uint64_t merged_queries() const noexcept { return pillars * queries(); }
  void validate() const;
};

struct ModuleCost {
  std::string module;
  std::uint64_t Q = 0;
  std::uint64_t V = 0;
  std::uint64_t params = 0;
  std::uint64_t flops = 0;
  std::uint64_t est_memory_bytes = 0;
};

struct ComplexityReport {
  ComplexityConfig config;
  std::vector<ModuleCost> modules;  // xqssm, deformable, dot_product

  const ModuleCost& find(const std::string& name) const;
};

std::uint64_t xqssm_layer_params(const ComplexityConfig& c);
std::uint64_t deformable_params(const ComplexityConfig& c);
std::uint64_t dot_product_params(const ComplexityConfig& c);

ComplexityReport complexity_report(const ComplexityConfig& config);

// The three (BEV, image) scale rows of the scaling comparison:
// 50x50 / 800x450, 100x100 / 1280x720, 200x200 / 1600x900.
std::vector<ComplexityConfig> scaling_rows(const ComplexityConfig& base = {});

struct PublishedScaling {
  std::string module;
  double gflops[3];
};

// Published GFLOPs for the three scaling rows.
std::vector<PublishedScaling> published_scaling();

}  // namespace xbev
