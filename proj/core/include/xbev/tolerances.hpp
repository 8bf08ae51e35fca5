// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

namespace xbev {

// Numeric constants shared by the kernels, the verification suite and the
// tests. Keep every threshold here so that a change is visible in one place.
struct Tolerances {
  // Scan-duality bounds: absolute at 64-bit, relative at 32-bit.
  static constexpr double kScanAbs64 = 1e-10;
  static constexpr double kScanRel32 = 1e-3;

  // Sequences longer than this build decay products from cumulative
  // log-decays instead of running products.
  static constexpr std::size_t kLogSpaceMinLength = 64;

  // Homogeneous coordinate cutoff for camera projection.
  static constexpr double kHomogeneousEps = 1e-5;

  static constexpr double kRmsEps = 1e-5;
  static constexpr double kLayerNormEps = 1e-5;

  // Deformable sampling weights must sum to one within this bound.
  static constexpr double kWeightSum = 1e-6;

  static constexpr double kDuplicationInvariance = 1e-9;
  static constexpr double kUvScaleInvariance = 1e-9;

  // Instrumented multiply-add counter versus the analytic XQSSM total.
  static constexpr double kFlopCounterRel = 0.05;

  // Table 2 scaling ratios.
  static constexpr double kScalingRatioRel = 0.30;

  // Per-camera hit count versus ZQ / cameras.
  static constexpr double kHitsPerCameraRel = 0.10;
};

}  // namespace xbev
