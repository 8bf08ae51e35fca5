// SPDX-License-Identifier: Apache-2.0

#include "xbev/harness/scene.hpp"

#include <cmath>

#include "xbev/error.hpp"
#include "xbev/harness/io.hpp"
#include "xbev/harness/json_io.hpp"
#include "xbev/rng.hpp"

namespace xbev::harness {
namespace {

[[noreturn]] void scene_fail(const std::string& path, const std::string& message) {
  fail(ErrorKind::kConfig, path + ": " + message, path);
}

MatrixD draw_values(std::size_t rows, std::size_t cols, const ValueInit& init, CounterRng rng) {
  MatrixD m(rows, cols);
  const double half_width = init.std * std::sqrt(3.0);
  for (double& v : m.values()) {
    v = init.distribution == "normal" ? init.mean + init.std * rng.normal()
                                      : init.mean + half_width * (2.0 * rng.uniform01() - 1.0);
  }
  return m;
}

MatrixD round_to_f32(MatrixD m) {
  for (double& v : m.values()) v = static_cast<double>(static_cast<float>(v));
  return m;
}

std::uint32_t u32(int v) { return static_cast<std::uint32_t>(v); }

}  // namespace

void SceneSpec::validate() const {
  if (cameras.empty()) scene_fail("cameras", "at least one camera is required");
  for (std::size_t c = 0; c < cameras.size(); ++c) {
    try {
      cameras[c].validate();
    } catch (const Error& e) {
      scene_fail("cameras[" + std::to_string(c) + "]", e.what());
    }
  }
  try {
    bev.validate();
  } catch (const Error& e) {
    scene_fail("bev", e.what());
  }
  if (feature_levels.empty()) scene_fail("feature_levels", "at least one level is required");
  for (std::size_t l = 0; l < feature_levels.size(); ++l) {
    const auto& f = feature_levels[l];
    const std::string p = "feature_levels[" + std::to_string(l) + "]";
    if (f.H_f < 1 || f.W_f < 1 || f.D < 1) scene_fail(p, "sizes must be positive");
    if (f.D != feature_levels.front().D) scene_fail(p + ".D", "all levels must share D");
  }
  if (value_init.distribution != "normal" && value_init.distribution != "uniform") {
    scene_fail("value_init.distribution", "expected 'normal' or 'uniform'");
  }
  if (!(value_init.std >= 0.0) || !std::isfinite(value_init.mean)) {
    scene_fail("value_init", "mean must be finite and std non-negative");
  }
  if (feature_files.size() != cameras.size()) {
    scene_fail("feature_files", "expected one list per camera");
  }
  for (std::size_t c = 0; c < feature_files.size(); ++c) {
    if (feature_files[c].size() != feature_levels.size()) {
      scene_fail("feature_files[" + std::to_string(c) + "]", "expected one file per level");
    }
  }
}

SceneSpec make_scene_spec(const GenSceneOptions& o) {
  if (o.cameras < 1) scene_fail("cameras", "at least one camera is required");
  SceneSpec s;
  s.seed = o.seed;
  s.cameras = make_ring_rig(o.cameras, o.yaw0, {0.0, 0.0, o.camera_height}, o.img_w, o.img_h);
  s.bev.H_bev = o.H_bev;
  s.bev.W_bev = o.W_bev;
  s.bev.extent = o.extent;
  s.bev.pillar_z = o.pillar_z;
  s.feature_levels = o.levels;
  s.value_init = o.value_init;
  for (int c = 0; c < o.cameras; ++c) {
    std::vector<std::string> names;
    for (std::size_t l = 0; l < o.levels.size(); ++l) {
      names.push_back("cam" + std::to_string(c) + "_level" + std::to_string(l) + ".xbev");
    }
    s.feature_files.push_back(std::move(names));
  }
  s.validate();
  return s;
}

LoadedScene generate_scene(const GenSceneOptions& options) {
  return generate_scene(make_scene_spec(options));
}

LoadedScene generate_scene(const SceneSpec& spec) {
  spec.validate();
  LoadedScene out;
  out.spec = spec;
  const SceneSpec& s = out.spec;
  const CounterRng root(s.seed);
  const auto D = static_cast<std::size_t>(s.feature_levels.front().D);
  out.queries = round_to_f32(
      draw_values(s.bev.queries(), D, ValueInit{"normal", 0.0, 1.0}, root.fork(1)));
  for (std::size_t c = 0; c < s.cameras.size(); ++c) {
    std::vector<FeatureMap> levels;
    for (std::size_t l = 0; l < s.feature_levels.size(); ++l) {
      const auto& f = s.feature_levels[l];
      levels.push_back(FeatureMap{
          f.H_f, f.W_f,
          round_to_f32(draw_values(static_cast<std::size_t>(f.H_f) * static_cast<std::size_t>(f.W_f),
                                   static_cast<std::size_t>(f.D), s.value_init,
                                   root.fork(1000 + 64 * c + l)))});
    }
    out.features.push_back(std::move(levels));
  }
  return out;
}

void gen_scene(const GenSceneOptions& options, const std::filesystem::path& out_dir) {
  write_scene(generate_scene(options), out_dir);
}

void gen_scene(const SceneSpec& spec, const std::filesystem::path& out_dir) {
  write_scene(generate_scene(spec), out_dir);
}

void write_scene(const LoadedScene& scene, const std::filesystem::path& out_dir) {
  const SceneSpec& s = scene.spec;
  ensure_directory(out_dir);
  const auto D = static_cast<std::uint32_t>(s.feature_levels.front().D);
  write_tensor(out_dir / s.queries_file,
               Tensor::from_matrix(scene.queries, {u32(s.bev.H_bev), u32(s.bev.W_bev), D}));
  for (std::size_t c = 0; c < s.cameras.size(); ++c) {
    for (std::size_t l = 0; l < s.feature_levels.size(); ++l) {
      const auto& f = s.feature_levels[l];
      write_tensor(out_dir / s.feature_files[c][l],
                   Tensor::from_matrix(scene.features[c][l].values, {u32(f.H_f), u32(f.W_f), u32(f.D)}));
    }
  }
  write_text(out_dir / "scene.json", to_json(s).dump(2) + "\n");
}

LoadedScene load_scene(const std::filesystem::path& dir) {
  const auto scene_path = dir / "scene.json";
  LoadedScene out;
  out.spec = scene_from_json(parse_json_text(read_text(scene_path), scene_path.string()));
  const auto& s = out.spec;
  const auto D = static_cast<std::uint32_t>(s.feature_levels.front().D);

  const Tensor q = read_tensor(dir / s.queries_file);
  if (q.shape != std::vector<std::uint32_t>{u32(s.bev.H_bev), u32(s.bev.W_bev), D}) {
    fail(ErrorKind::kIo, (dir / s.queries_file).string() + ": shape does not match the BEV grid",
         (dir / s.queries_file).string());
  }
  out.queries = q.as_matrix();

  for (std::size_t c = 0; c < s.cameras.size(); ++c) {
    std::vector<FeatureMap> levels;
    for (std::size_t l = 0; l < s.feature_levels.size(); ++l) {
      const auto& f = s.feature_levels[l];
      const auto path = dir / s.feature_files[c][l];
      const Tensor t = read_tensor(path);
      if (t.shape != std::vector<std::uint32_t>{u32(f.H_f), u32(f.W_f), u32(f.D)}) {
        fail(ErrorKind::kIo, path.string() + ": shape does not match feature level " +
                                 std::to_string(l), path.string());
      }
      levels.push_back(FeatureMap{f.H_f, f.W_f, t.as_matrix()});
    }
    out.features.push_back(std::move(levels));
  }
  return out;
}

}  // namespace xbev::harness
