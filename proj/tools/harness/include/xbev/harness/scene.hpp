// SPDX-License-Identifier: Apache-2.0
//
// Synthetic multi-camera scenes: a camera rig, a BEV grid, per-camera feature
// maps and the BEV query grid, all derived from one seed.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xbev/geometry.hpp"
#include "xbev/layer.hpp"

namespace xbev::harness {

struct FeatureLevelSpec {
  int H_f = 8;
  int W_f = 15;
  int D = 32;
  bool operator==(const FeatureLevelSpec&) const = default;
};

// Values are drawn i.i.d. from "normal" (mean, std) or "uniform" with the
// same mean and standard deviation.
struct ValueInit {
  std::string distribution = "normal";
  double mean = 0.0;
  double std = 1.0;
  bool operator==(const ValueInit&) const = default;
};

struct SceneSpec {
  std::uint64_t seed = 0;
  std::vector<CameraModel> cameras;
  BEVGridSpec bev;
  std::vector<FeatureLevelSpec> feature_levels{FeatureLevelSpec{}};
  ValueInit value_init;
  std::string queries_file = "queries.xbev";
  // feature_files[camera][level]
  std::vector<std::vector<std::string>> feature_files;

  void validate() const;
  bool operator==(const SceneSpec&) const = default;
};

struct GenSceneOptions {
  std::uint64_t seed = 42;
  int cameras = 6;
  int img_w = 480;
  int img_h = 240;
  double camera_height = 1.5;
  double yaw0 = 0.0;
  int H_bev = 20;
  int W_bev = 20;
  BevExtent extent{};
  std::vector<double> pillar_z{-1.0, 1.0 / 3.0, 5.0 / 3.0, 3.0};
  std::vector<FeatureLevelSpec> levels{FeatureLevelSpec{}};
  ValueInit value_init;
};

SceneSpec make_scene_spec(const GenSceneOptions& options);

struct LoadedScene {
  SceneSpec spec;
  MatrixD queries;  // Q x D
  CameraFeatures features;
};

// Draws all tensors in memory (float32-rounded, matching what gen_scene
// writes).
LoadedScene generate_scene(const GenSceneOptions& options);
LoadedScene generate_scene(const SceneSpec& spec);

// Writes scene.json, queries.xbev and one tensor per camera and level.
void gen_scene(const GenSceneOptions& options, const std::filesystem::path& out_dir);
void gen_scene(const SceneSpec& spec, const std::filesystem::path& out_dir);
void write_scene(const LoadedScene& scene, const std::filesystem::path& out_dir);

LoadedScene load_scene(const std::filesystem::path& dir);

}  // namespace xbev::harness
