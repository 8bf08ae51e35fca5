// SPDX-License-Identifier: Apache-2.0
//
// xbev: scene generation, layer runs, complexity reports, invariant checks
// and timings.
//
// Exit codes: 0 success, 1 verification failure or numeric breakdown,
// 2 usage or config error, 3 I/O error. Failures print one JSON object
// {"error": {"kind", "message", "detail"}} on stderr.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "xbev/error.hpp"
#include "xbev/harness/bench.hpp"
#include "xbev/harness/io.hpp"
#include "xbev/harness/json_io.hpp"
#include "xbev/harness/pipeline.hpp"
#include "xbev/harness/report.hpp"
#include "xbev/harness/scene.hpp"
#include "xbev/harness/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace xbev;
using namespace xbev::harness;

namespace {

constexpr int kOk = 0;
constexpr int kVerifyFailed = 1;
constexpr int kUsage = 2;
constexpr int kIoError = 3;

struct Globals {
  std::uint64_t seed = 42;
  std::string out;
  std::string config;
  std::string format = "json";
};

int report_error(std::string_view kind, const std::string& message, const std::string& detail,
                 int code) {
  const json err{{"error", {{"kind", kind}, {"message", message}, {"detail", detail}}},
                 {"exit_code", code}};
  std::cerr << err.dump() << std::endl;
  return code;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo:
      return kIoError;
    case ErrorKind::kNumeric:
      return kVerifyFailed;
    default:
      return kUsage;
  }
}

json load_json_file(const std::string& path) { return parse_json_text(read_text(path), path); }

// Prints to stdout and, when `out_file` is set, writes the same text there.
void emit(const std::string& text, const std::optional<fs::path>& out_file) {
  std::cout << text;
  if (!text.empty() && text.back() != '\n') std::cout << '\n';
  if (out_file) {
    if (out_file->has_parent_path()) ensure_directory(out_file->parent_path());
    write_text(*out_file, text.back() == '\n' ? text : text + "\n");
  }
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

int cmd_gen_scene(const Globals& g, const GenSceneOptions& flags) {
  if (g.out.empty()) return report_error("usage", "gen-scene requires --out", "--out", kUsage);
  const fs::path dir(g.out);
  SceneSpec spec;
  if (!g.config.empty()) {
    spec = scene_from_json(load_json_file(g.config));
  } else {
    GenSceneOptions o = flags;
    o.seed = g.seed;
    spec = make_scene_spec(o);
  }
  gen_scene(spec, dir);

  json files = json::object();
  files["scene.json"] = sha256_file(dir / "scene.json");
  files[spec.queries_file] = sha256_file(dir / spec.queries_file);
  for (const auto& cam : spec.feature_files) {
    for (const auto& f : cam) files[f] = sha256_file(dir / f);
  }
  if (g.format == "csv") {
    std::ostringstream out;
    out << "file,sha256\n";
    for (const auto& [name, sha] : files.items()) out << csv_escape(name) << ',' << sha.get<std::string>() << '\n';
    emit(out.str(), std::nullopt);
  } else {
    emit(json{{"scene_dir", dir.string()}, {"seed", spec.seed}, {"sha256", files}}.dump(2),
         std::nullopt);
  }
  return kOk;
}

int cmd_run(const Globals& g, const std::string& scene_dir) {
  if (g.out.empty()) return report_error("usage", "run requires --out", "--out", kUsage);
  const LayerConfig config =
      g.config.empty() ? LayerConfig{} : layer_config_from_json(load_json_file(g.config));
  const PipelineResult r = run_pipeline(scene_dir, config, g.out, g.seed);
  if (g.format == "csv") {
    std::ostringstream out;
    out << "stage,norm\n";
    for (const auto& [stage, v] : r.summary["norms"].items()) out << stage << ',' << v.dump() << '\n';
    emit(out.str(), std::nullopt);
  } else {
    emit(r.summary.dump(2), std::nullopt);
  }
  return kOk;
}

int cmd_flops(const Globals& g, bool scaling) {
  ComplexityConfig base;
  if (!g.config.empty()) base = complexity_config_from_json(load_json_file(g.config));
  base.validate();
  std::vector<ComplexityReport> reports;
  if (scaling) {
    for (const auto& row : scaling_rows(base)) reports.push_back(complexity_report(row));
  } else {
    reports.push_back(complexity_report(base));
  }
  const std::optional<fs::path> out = g.out.empty() ? std::nullopt : std::optional<fs::path>(g.out);
  if (g.format == "csv") {
    emit(report_csv(reports), out);
  } else {
    json j = report_json(reports);
    if (scaling) j["scaling"] = scaling_json(reports);
    emit(j.dump(2), out);
  }
  return kOk;
}

int cmd_verify(const Globals& g, const std::string& level_name, std::string scratch) {
  const auto level = parse_verify_level(level_name);
  if (!level) return report_error("usage", "unknown --level '" + level_name + "'", "--level", kUsage);
  if (scratch.empty()) scratch = (fs::temp_directory_path() / "xbev-verify").string();
  ensure_directory(scratch);
  const VerifyReport report = verify_suite(*level, g.seed, scratch);
  const std::optional<fs::path> out = g.out.empty() ? std::nullopt : std::optional<fs::path>(g.out);
  if (g.format == "csv") {
    std::ostringstream s;
    s << "name,instances,max_error,tolerance,passed\n";
    for (const auto& c : report.checks) {
      s << c.name << ',' << c.instances << ',' << c.max_error << ',' << c.tolerance << ','
        << (c.passed ? "true" : "false") << '\n';
    }
    emit(s.str(), out);
  } else {
    emit(report.to_json().dump(2), out);
  }
  return report.all_passed() ? kOk : kVerifyFailed;
}

int cmd_bench(const Globals& g, int repeats, bool quick) {
  if (repeats < 1) return report_error("usage", "--repeats must be >= 1", "--repeats", kUsage);
  const auto rows = run_bench(g.seed, repeats, quick);
  const std::optional<fs::path> out = g.out.empty() ? std::nullopt : std::optional<fs::path>(g.out);
  emit(g.format == "csv" ? bench_csv(rows) : bench_json(rows).dump(2), out);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"xbev: cross-attention state space layer toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Seed for scene generation, parameters and checks");
  app.add_option("--out", g.out, "Output directory (gen-scene, run) or report file");
  app.add_option("--config", g.config, "Scene, layer or complexity config JSON");
  app.add_option("--format", g.format, "Report format")->check(CLI::IsMember({"json", "csv"}));

  GenSceneOptions scene_flags;
  auto* gen = app.add_subcommand("gen-scene", "Write a seeded synthetic scene");
  gen->add_option("--cameras", scene_flags.cameras, "Cameras on the ring rig");
  gen->add_option("--img-w", scene_flags.img_w, "Image width in pixels");
  gen->add_option("--img-h", scene_flags.img_h, "Image height in pixels");
  gen->add_option("--bev-h", scene_flags.H_bev, "BEV rows");
  gen->add_option("--bev-w", scene_flags.W_bev, "BEV columns");
  gen->add_option("--yaw0", scene_flags.yaw0, "Yaw of the first camera in radians");

  std::string scene_dir;
  auto* run = app.add_subcommand("run", "Run the encoder layer pair on a scene");
  run->add_option("--scene", scene_dir, "Scene directory")->required();

  bool scaling = false;
  auto* flops = app.add_subcommand("flops", "Complexity report");
  flops->add_flag("--scaling", scaling, "Report the three scaling rows with ratios");

  std::string level = "fast";
  std::string scratch;
  auto* verify = app.add_subcommand("verify", "Run the invariant checks");
  verify->add_option("--level", level, "fast or full");
  verify->add_option("--scratch", scratch, "Directory for temporary files");

  int repeats = 3;
  bool quick = false;
  auto* bench = app.add_subcommand("bench", "Time the kernels");
  bench->add_option("--repeats", repeats, "Repetitions per kernel");
  bench->add_flag("--quick", quick, "Smaller sizes only");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what(), e.get_name(), kUsage);
  }

  try {
    if (*gen) return cmd_gen_scene(g, scene_flags);
    if (*run) return cmd_run(g, scene_dir);
    if (*flops) return cmd_flops(g, scaling);
    if (*verify) return cmd_verify(g, level, scratch);
    if (*bench) return cmd_bench(g, repeats, quick);
  } catch (const Error& e) {
    return report_error(to_string(e.kind()), e.what(), e.detail(), exit_code_for(e.kind()));
  } catch (const fs::filesystem_error& e) {
    return report_error("io", e.what(), e.path1().string(), kIoError);
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), "", kUsage);
  }
  return kUsage;
}
