// SPDX-License-Identifier: Apache-2.0
//
// One PASS/FAIL line per acceptance criterion. argv[1] is a scratch
// directory. Exit status is nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "xbev/harness/checks.hpp"
#include "xbev/harness/io.hpp"
#include "xbev/harness/pipeline.hpp"
#include "xbev/harness/scene.hpp"

namespace fs = std::filesystem;
using namespace xbev;
using namespace xbev::harness;

namespace {

constexpr std::uint64_t kSeed = 20240917;

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string describe(const CheckResult& c) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s n=%zu max_err=%.3e tol=%.1e", c.name.c_str(), c.instances,
                c.max_error, c.tolerance);
  std::string s = buf;
  if (!c.detail.empty()) s += " (" + c.detail + ")";
  return s;
}

Outcome all_of(const std::vector<CheckResult>& checks) {
  Outcome o{true, ""};
  for (const auto& c : checks) {
    o.passed = o.passed && c.passed;
    if (!o.detail.empty()) o.detail += "; ";
    o.detail += describe(c);
  }
  return o;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome timed(double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o = body();
  const double dt = seconds_since(t0);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "; %.2fs of %.0fs", dt, budget_s);
  o.detail += buf;
  o.passed = o.passed && dt <= budget_s;
  return o;
}

Outcome flop_criterion() {
  std::vector<FlopSample> samples;
  const auto c = check_flop_formula({100, 316, 1000, 3162, 10000}, {1, 10, 100, 1000}, kSeed, &samples);
  for (const auto& s : samples) {
    std::printf("  flops V=%llu M=%llu counted=%llu formula=%llu rel_err=%.4f\n",
                static_cast<unsigned long long>(s.V), static_cast<unsigned long long>(s.M),
                static_cast<unsigned long long>(s.counted), static_cast<unsigned long long>(s.formula),
                s.rel_error);
  }
  return all_of({c});
}

Outcome determinism_criterion(const fs::path& scratch) {
  const fs::path scene = scratch / "scene";
  GenSceneOptions o = smoke_scene_options(kSeed);
  gen_scene(o, scene);
  const LayerConfig config = smoke_layer_config();
  run_pipeline(scene, config, scratch / "run_a", kSeed);
  run_pipeline(scene, config, scratch / "run_b", kSeed);
  const auto a = sha256_file(scratch / "run_a" / "output.xbev");
  const auto b = sha256_file(scratch / "run_b" / "output.xbev");
  return {a == b, "sha256 " + a.substr(0, 16) + " vs " + b.substr(0, 16)};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path scratch =
      argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "xbev-acceptance";
  fs::remove_all(scratch);
  fs::create_directories(scratch);

  struct Criterion {
    int id;
    std::string title;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "scan forms agree with the direct-sum oracle",
       [] { return timed(30.0, [] { return all_of({check_scan_duality(200, 128, kSeed)}); }); }},
      {2, "state is frozen across query tokens",
       [] { return all_of({check_dt0_law(100, 128, kSeed + 2)}); }},
      {3, "xqssm matches the generic scan and its parallel form",
       [] {
         return all_of({check_xqssm_oracle(100, 128, kSeed + 3),
                        check_xqssm_parallel(100, 128, kSeed + 4)});
       }},
      {4, "instrumented FLOP count within 5% of the closed form", flop_criterion},
      {5, "scaling-row ratios match the published ratios", [] { return all_of({check_scaling_ratios()}); }},
      {6, "merge matches naive insertion", [] { return all_of({check_merge_oracle(1000, kSeed + 6)}); }},
      {7, "disjoint-FOV ring splits hits evenly",
       [] { return all_of({check_disjoint_fov(10, 6, kSeed + 7)}); }},
      {8, "residual, duplication and configuration coverage",
       [] {
         return timed(120.0, [] {
           return all_of({check_residual_guarantee(kSeed + 8), check_zero_hit_independence(kSeed + 8),
                          check_duplication_invariance(kSeed + 8), check_config_coverage(kSeed + 8)});
         });
       }},
      {9, "pipeline output is byte-identical across runs",
       [&scratch] { return determinism_criterion(scratch); }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.passed) ++failed;
    std::printf("%s criterion %d: %s [%s]\n", o.passed ? "PASS" : "FAIL", c.id, c.title.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
