// SPDX-License-Identifier: Apache-2.0
//
// Slow, direct reference implementations. They share only data types with the
// library and recompute everything from the defining sums.

#pragma once

#include <optional>
#include <vector>

#include "xbev/baselines.hpp"
#include "xbev/geometry.hpp"
#include "xbev/matrix.hpp"
#include "xbev/merge.hpp"
#include "xbev/ssm_core.hpp"
#include "xbev/xqssm.hpp"

namespace xbev::oracle {

// y_t = sum_{s<=t} (C_t . B_s) delta_s prod_{k=s+1..t} exp(delta_k A) x_s + D x_t
MatrixD ssm_direct_sum(const SSMDims& dims, const SequenceBatch<double>& seq,
                       const SSMParams<double>& params);

// Dense quasiseparable sum: strictly-lower part from the forward parameters,
// strictly-upper part from the backward parameters, diagonal = mean skip.
MatrixD hydra_dense(const SSMDims& dims, const SequenceBatch<double>& seq,
                    const SSMParams<double>& fwd, const SSMParams<double>& bwd);

// Generic full scan over both directions with delta pinned to exactly 0 at
// query rows and no skip; returns the summed outputs at query rows.
MatrixD xqssm_generic_scan(const SSMDims& dims, const XqssmInput& input,
                           const DirectionalParams& params);

// Walks the features once per position and drops in every query whose 1D
// index equals that position, in input order. O(V * M).
MergedStream naive_insert(const MatrixD& values, const MatrixD& queries,
                          const std::vector<std::int64_t>& r1d,
                          const std::vector<std::int64_t>& extract_ids);

// Tent-kernel sum over every pixel of the map.
std::vector<double> bilinear_dense(const MatrixD& map, int H_f, int W_f, Vec2 uv);

MatrixD deformable_dense(const MatrixD& map, int H_f, int W_f, const DeformableSamples& samples);

// softmax without max subtraction, accumulated in long double.
MatrixD softmax_attention(const MatrixD& Q, const MatrixD& K, const MatrixD& Vv);

// y_i = sum_s (C_i . B_s) delta_s prod_{k>s} exp(delta_k A) x_s
MatrixD naive_mamba_sum(const SSMDims& dims, const SequenceBatch<double>& values,
                        const SSMParams<double>& params, const MatrixD& C_rows);

// Normalized image coordinates of a world point seen by a camera at `position`
// looking along `yaw` with horizontal field of view `hfov` and square pixels,
// computed from angles; nullopt behind the camera.
std::optional<Vec2> angular_projection(double yaw, const Vec3& position, double hfov, int img_w,
                                       int img_h, const Vec3& point);

}  // namespace xbev::oracle
