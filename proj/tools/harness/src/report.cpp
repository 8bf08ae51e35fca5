// SPDX-License-Identifier: Apache-2.0

#include "xbev/harness/report.hpp"

#include <sstream>

#include "xbev/harness/json_io.hpp"

namespace xbev::harness {

nlohmann::json report_json(const std::vector<ComplexityReport>& reports) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json modules = nlohmann::json::array();
    for (const auto& m : r.modules) {
      modules.push_back({{"module", m.module},
                         {"Q", m.Q},
                         {"V", m.V},
                         {"params", m.params},
                         {"flops", m.flops},
                         {"est_memory_bytes", m.est_memory_bytes}});
    }
    rows.push_back({{"config", to_json(r.config)}, {"modules", modules}});
  }
  return {{"counting", "flops are closed-form operation counts; see README for the convention"},
          {"reports", rows}};
}

std::string report_csv(const std::vector<ComplexityReport>& reports) {
  std::ostringstream out;
  out << "# flops are closed-form operation counts; see README for the convention\n";
  out << "module,Q,V,params,flops,est_memory_bytes\n";
  for (const auto& r : reports) {
    for (const auto& m : r.modules) {
      out << m.module << ',' << m.Q << ',' << m.V << ',' << m.params << ',' << m.flops << ','
          << m.est_memory_bytes << '\n';
    }
  }
  return out.str();
}

nlohmann::json scaling_json(const std::vector<ComplexityReport>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& pub : published_scaling()) {
    nlohmann::json model = nlohmann::json::array();
    nlohmann::json ratios = nlohmann::json::array();
    nlohmann::json published_ratios = nlohmann::json::array();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      model.push_back(static_cast<double>(rows[i].find(pub.module).flops) * 1e-9);
    }
    for (std::size_t i = 1; i < rows.size() && i < 3; ++i) {
      ratios.push_back(static_cast<double>(rows[i].find(pub.module).flops) /
                       static_cast<double>(rows[0].find(pub.module).flops));
      published_ratios.push_back(pub.gflops[i] / pub.gflops[0]);
    }
    out.push_back({{"module", pub.module},
                   {"model_gflops", model},
                   {"published_gflops", {pub.gflops[0], pub.gflops[1], pub.gflops[2]}},
                   {"model_ratios", ratios},
                   {"published_ratios", published_ratios}});
  }
  return out;
}

}  // namespace xbev::harness
