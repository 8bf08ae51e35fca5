// SPDX-License-Identifier: Apache-2.0
//
// Runs every invariant check with seeded instances and collects a report.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "xbev/harness/checks.hpp"

namespace xbev::harness {

enum class VerifyLevel { kFast, kFull };

std::optional<VerifyLevel> parse_verify_level(std::string_view name);
std::string_view to_string(VerifyLevel level);

struct VerifyReport {
  VerifyLevel level = VerifyLevel::kFast;
  std::uint64_t seed = 0;
  std::vector<CheckResult> checks;
  std::vector<FlopSample> flop_samples;

  bool all_passed() const noexcept;
  nlohmann::json to_json() const;
};

// `scratch` receives the temporary files of the tensor-guard check.
VerifyReport verify_suite(VerifyLevel level, std::uint64_t seed,
                          const std::filesystem::path& scratch);

}  // namespace xbev::harness
