// SPDX-License-Identifier: Apache-2.0
//
// Complexity report serialization. The CSV columns are
// module,Q,V,params,flops,est_memory_bytes after one comment line.

#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xbev/baselines.hpp"

namespace xbev::harness {

nlohmann::json report_json(const std::vector<ComplexityReport>& reports);
std::string report_csv(const std::vector<ComplexityReport>& reports);

// Model ratios across the scaling rows next to the published ones.
nlohmann::json scaling_json(const std::vector<ComplexityReport>& rows);

}  // namespace xbev::harness
