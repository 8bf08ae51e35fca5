// SPDX-License-Identifier: Apache-2.0

#include "xbev/harness/verify.hpp"

#include <algorithm>
#include <functional>
#include <string>

namespace xbev::harness {

std::optional<VerifyLevel> parse_verify_level(std::string_view name) {
  if (name == "fast") return VerifyLevel::kFast;
  if (name == "full") return VerifyLevel::kFull;
  return std::nullopt;
}

std::string_view to_string(VerifyLevel level) {
  return level == VerifyLevel::kFast ? "fast" : "full";
}

bool VerifyReport::all_passed() const noexcept {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

nlohmann::json VerifyReport::to_json() const {
  nlohmann::json j;
  j["level"] = to_string(level);
  j["seed"] = seed;
  j["passed"] = all_passed();
  j["checks"] = nlohmann::json::array();
  for (const auto& c : checks) j["checks"].push_back(c.to_json());
  j["flop_samples"] = nlohmann::json::array();
  for (const auto& s : flop_samples) {
    j["flop_samples"].push_back(
        {{"V", s.V}, {"M", s.M}, {"counted", s.counted}, {"formula", s.formula},
         {"rel_error", s.rel_error}});
  }
  return j;
}

VerifyReport verify_suite(VerifyLevel level, std::uint64_t seed,
                          const std::filesystem::path& scratch) {
  const bool full = level == VerifyLevel::kFull;
  const std::size_t n = full ? 200 : 20;
  const std::size_t max_len = full ? 128 : 64;
  VerifyReport report;
  report.level = level;
  report.seed = seed;
  // A check that throws is recorded as failed and the suite continues.
  struct Sink {
    std::vector<CheckResult>& checks;
    void add(std::function<CheckResult()> run, const std::string& name) {
      try {
        checks.push_back(run());
      } catch (const std::exception& e) {
        checks.push_back({name, 0, 0.0, 0.0, false, std::string("threw: ") + e.what()});
      }
    }
  } out{report.checks};
  // Each check draws from its own stream so adding checks never shifts others.
  auto s = [seed](std::uint64_t k) { return seed * 1000003ULL + k; };

  out.add([&] { return check_scan_duality(n, max_len, s(1)); }, "scan_duality");
  out.add([&] { return check_ssm_properties(full ? 100 : 10, s(2)); }, "ssm_properties");
  out.add([&] { return check_hydra(full ? 100 : 10, max_len, s(3)); }, "hydra_quasiseparable");

  out.add([&] { return check_dt0_law(full ? 100 : 20, max_len, s(4)); }, "dt0_state_identity");
  out.add([&] { return check_xqssm_oracle(full ? 100 : 20, max_len, s(5)); }, "xqssm_vs_generic_scan");
  out.add([&] { return check_xqssm_parallel(full ? 100 : 20, max_len, s(6)); }, "xqssm_parallel_vs_recurrent");
  out.add([&] { return check_xqssm_causality(full ? 100 : 20, s(7)); }, "xqssm_directional_causality");
  const std::vector<std::uint64_t> Vs =
      full ? std::vector<std::uint64_t>{100, 316, 1000, 3162, 10000}
           : std::vector<std::uint64_t>{100, 1000};
  const std::vector<std::uint64_t> Ms =
      full ? std::vector<std::uint64_t>{1, 10, 100, 1000} : std::vector<std::uint64_t>{1, 100};
  out.add([&] { return check_flop_formula(Vs, Ms, s(8), &report.flop_samples); }, "flop_formula");
  out.add([&] { return check_constant_memory(s(9)); }, "constant_recurrent_memory");

  out.add([&] { return check_merge_oracle(full ? 1000 : 100, s(10)); }, "merge_oracle");
  out.add([&] { return check_traversals(full ? 50 : 10, s(11)); }, "traversal_bijection");

  out.add([&] { return check_projection(full ? 50 : 10, s(12)); }, "projection_vs_angular_oracle");
  out.add([&] { return check_geometry_properties(full ? 50 : 10, s(13)); }, "geometry_properties");
  out.add([&] { return check_disjoint_fov(10, 6, s(14)); }, "disjoint_fov_hits");

  out.add([&] { return check_softmax(full ? 50 : 10, s(15)); }, "dot_product_vs_softmax_oracle");
  out.add([&] { return check_naive_mamba(full ? 50 : 10, s(16)); }, "naive_mamba_vs_sum");
  out.add([&] { return check_deformable(full ? 50 : 10, s(17)); }, "deformable_vs_dense_bilinear");
  out.add([&] { return check_scaling_ratios(); }, "scaling_ratios");
  out.add([&] { return check_estimator_monotonicity(); }, "estimator_monotonicity");

  out.add([&] { return check_residual_guarantee(s(18)); }, "residual_guarantee");
  out.add([&] { return check_zero_hit_independence(s(19)); }, "zero_hit_independence");
  out.add([&] { return check_duplication_invariance(s(20)); }, "average_duplication_invariance");
  out.add([&] { return check_after_conv_isolation(s(21)); }, "after_conv_query_isolation");
  out.add([&] { return check_config_coverage(s(22)); }, "config_coverage");

  out.add([&] { return check_scene_roundtrip(s(23)); }, "scene_json_roundtrip");
  out.add([&] { return check_tensor_guards(scratch.string()); }, "tensor_format_guards");
  return report;
}

}  // namespace xbev::harness
