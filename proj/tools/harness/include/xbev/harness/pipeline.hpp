// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "xbev/harness/scene.hpp"
#include "xbev/layer.hpp"

namespace xbev::harness {

struct PipelineResult {
  MatrixD output;          // Q x D
  nlohmann::json summary;  // also written as summary.json
};

// BEV self-attention (Hydra, row-major) followed by the spatial cross layer.
// Parameters derive from `param_seed`.
PipelineResult run_pipeline_in_memory(const LoadedScene& scene, const LayerConfig& config,
                                      std::uint64_t param_seed);

// Loads the scene, runs the pipeline and writes output.xbev and summary.json
// into `out_dir`.
PipelineResult run_pipeline(const std::filesystem::path& scene_dir, const LayerConfig& config,
                            const std::filesystem::path& out_dir, std::uint64_t param_seed);

}  // namespace xbev::harness
