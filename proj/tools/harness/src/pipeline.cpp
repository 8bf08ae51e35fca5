// SPDX-License-Identifier: Apache-2.0

#include "xbev/harness/pipeline.hpp"

#include "xbev/error.hpp"
#include "xbev/harness/io.hpp"
#include "xbev/harness/json_io.hpp"

namespace xbev::harness {

PipelineResult run_pipeline_in_memory(const LoadedScene& scene, const LayerConfig& config,
                                      std::uint64_t param_seed) {
  const auto& s = scene.spec;
  if (config.dims.model_dim != s.feature_levels.front().D) {
    fail(ErrorKind::kConfig,
         "dims.model_dim: " + std::to_string(config.dims.model_dim) +
             " does not match scene feature width " + std::to_string(s.feature_levels.front().D),
         "dims.model_dim");
  }
  config.validate();

  const HydraParams hydra = HydraParams::init(config.dims, config.conv_width, param_seed);
  const LayerParams layer = LayerParams::init(config.dims, config.conv_width, param_seed + 1);

  const MatrixD grid = hydra_self_attention(scene.queries, s.bev.H_bev, s.bev.W_bev, config.dims, hydra);
  const ReferencePointSet refs = build_reference_points(s.bev, s.cameras);

  LayerTrace trace;
  MatrixD out = spatial_cross_mamba_forward(grid, scene.features, refs, layer, config, &trace);

  std::size_t zero_hit = 0;
  json per_query_hist = json::object();
  for (std::size_t q = 0; q < refs.queries; ++q) {
    const std::size_t h = refs.hits_of_query(q);
    if (h == 0) ++zero_hit;
    per_query_hist[std::to_string(h)] = per_query_hist.value(std::to_string(h), 0) + 1;
  }

  json summary{
      {"seed", s.seed},
      {"param_seed", param_seed},
      {"config", to_json(config)},
      {"shape", {s.bev.H_bev, s.bev.W_bev, config.dims.model_dim}},
      {"norms",
       {{"input", frobenius_norm(scene.queries)},
        {"self_attention", frobenius_norm(grid)},
        {"projected_values", trace.norm_projected},
        {"gated", trace.norm_gated},
        {"accumulated", trace.norm_accumulated},
        {"update", trace.norm_update},
        {"output", trace.norm_output}}},
      {"hits",
       {{"per_camera", refs.M},
        {"total", refs.total_hits()},
        {"zero_hit_queries", zero_hit},
        {"hits_per_query_histogram", per_query_hist}}},
      {"streams", trace.streams},
      {"flops",
       {{"xqssm_counted_units", trace.xqssm_units},
        {"xqssm_formula", trace.xqssm_formula_total}}},
  };
  return {std::move(out), std::move(summary)};
}

PipelineResult run_pipeline(const std::filesystem::path& scene_dir, const LayerConfig& config,
                            const std::filesystem::path& out_dir, std::uint64_t param_seed) {
  const LoadedScene scene = load_scene(scene_dir);
  PipelineResult r = run_pipeline_in_memory(scene, config, param_seed);
  ensure_directory(out_dir);
  const auto& b = scene.spec.bev;
  const auto out_path = out_dir / "output.xbev";
  write_tensor(out_path, Tensor::from_matrix(r.output, {static_cast<std::uint32_t>(b.H_bev),
                                                       static_cast<std::uint32_t>(b.W_bev),
                                                       static_cast<std::uint32_t>(r.output.cols())}));
  json inputs = json::object();
  inputs[scene.spec.queries_file] = sha256_file(scene_dir / scene.spec.queries_file);
  for (const auto& cam : scene.spec.feature_files) {
    for (const auto& f : cam) inputs[f] = sha256_file(scene_dir / f);
  }
  r.summary["checksums"] = {{"output.xbev", sha256_file(out_path)}, {"inputs", inputs}};
  write_text(out_dir / "summary.json", r.summary.dump(2) + "\n");
  return r;
}

}  // namespace xbev::harness
