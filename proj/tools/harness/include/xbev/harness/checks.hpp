// SPDX-License-Identifier: Apache-2.0
//
// Seeded invariant checks comparing library routines against the oracles.
// Each returns one CheckResult; `verify` and the acceptance binary compose
// them with different instance counts.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xbev/harness/scene.hpp"
#include "xbev/layer.hpp"

namespace xbev::harness {

struct CheckResult {
  std::string name;
  std::size_t instances = 0;
  double max_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;

  nlohmann::json to_json() const;
};

// Recurrent scan vs matrix-mixer form vs direct-sum oracle.
CheckResult check_scan_duality(std::size_t instances, std::size_t max_len, std::uint64_t seed);
// Decay range, exact chaining, zero-C skip path, 32-bit accuracy and the
// Hydra reversal symmetry.
CheckResult check_ssm_properties(std::size_t instances, std::uint64_t seed);
// Hydra mixer vs dense quasiseparable oracle.
CheckResult check_hydra(std::size_t instances, std::size_t max_len, std::uint64_t seed);
// State is bit-identical across every query token.
CheckResult check_dt0_law(std::size_t instances, std::size_t max_len, std::uint64_t seed);
// xqssm_recurrent vs generic scan with delta pinned to 0 at queries.
CheckResult check_xqssm_oracle(std::size_t instances, std::size_t max_len, std::uint64_t seed);
// Perturbing features later in a direction leaves that direction's readout
// of an earlier query unchanged.
CheckResult check_xqssm_causality(std::size_t instances, std::uint64_t seed);
// xqssm_parallel vs xqssm_recurrent.
CheckResult check_xqssm_parallel(std::size_t instances, std::size_t max_len, std::uint64_t seed);

struct FlopSample {
  std::uint64_t V = 0;
  std::uint64_t M = 0;
  std::uint64_t counted = 0;
  std::uint64_t formula = 0;
  double rel_error = 0.0;
};

// Instrumented counter vs closed-form total on a V x M grid at default dims.
CheckResult check_flop_formula(const std::vector<std::uint64_t>& V_values,
                               const std::vector<std::uint64_t>& M_values, std::uint64_t seed,
                               std::vector<FlopSample>* samples = nullptr);
// Auxiliary memory of the recurrent kernel does not grow with L.
CheckResult check_constant_memory(std::uint64_t seed);

// index_offset + build_merged vs naive quadratic insertion, plus filter round trips.
CheckResult check_merge_oracle(std::size_t instances, std::uint64_t seed);
// Every traversal is a bijection with a consistent inverse.
CheckResult check_traversals(std::size_t instances, std::uint64_t seed);

// Homogeneous projection vs angle-based oracle.
CheckResult check_projection(std::size_t instances, std::uint64_t seed);
// Hit bounds, M <= Q*Z and uv invariance under consistent image rescaling.
CheckResult check_geometry_properties(std::size_t instances, std::uint64_t seed);
// Ring of `cameras` with disjoint FOVs: every hit point hits exactly one
// camera, far points always hit, and per-camera M averaged over `seeds`
// random rig yaws is within tolerance of Z*Q/cameras.
CheckResult check_disjoint_fov(std::size_t seeds, int cameras, std::uint64_t seed);

CheckResult check_softmax(std::size_t instances, std::uint64_t seed);
CheckResult check_naive_mamba(std::size_t instances, std::uint64_t seed);
CheckResult check_deformable(std::size_t instances, std::uint64_t seed);
// Published scaling-row GFLOP ratios per module family.
CheckResult check_scaling_ratios();
CheckResult check_estimator_monotonicity();

// Tiny scene used by the layer checks and smoke runs.
GenSceneOptions smoke_scene_options(std::uint64_t seed);
LayerConfig smoke_layer_config();

CheckResult check_residual_guarantee(std::uint64_t seed);
CheckResult check_zero_hit_independence(std::uint64_t seed);
CheckResult check_duplication_invariance(std::uint64_t seed);
CheckResult check_after_conv_isolation(std::uint64_t seed);
// Every norm x insertion x merge x extract x zero-flag combination runs to
// finite outputs.
CheckResult check_config_coverage(std::uint64_t seed);

CheckResult check_scene_roundtrip(std::uint64_t seed);
// Bad magic, truncated payload and missing files fail naming the file.
CheckResult check_tensor_guards(const std::string& scratch_dir);

}  // namespace xbev::harness
