// SPDX-License-Identifier: Apache-2.0
//
// Strict JSON mapping for scenes and layer configs. Unknown fields are
// rejected; errors carry the offending field path (e.g. "bev.extent.x_min").

#pragma once

#include <nlohmann/json.hpp>

#include <string>

#include "xbev/baselines.hpp"
#include "xbev/harness/scene.hpp"
#include "xbev/layer.hpp"

namespace xbev::harness {

using nlohmann::json;

json to_json(const SceneSpec& scene);
SceneSpec scene_from_json(const json& j);

json to_json(const LayerConfig& config);
LayerConfig layer_config_from_json(const json& j);

// Every field is optional and defaults to the ComplexityConfig default.
json to_json(const ComplexityConfig& config);
ComplexityConfig complexity_config_from_json(const json& j);

json to_json(const TraversalOrder& order);
TraversalOrder traversal_from_json(const json& j, const std::string& path);

// Parses text, mapping syntax errors to config errors naming `source`.
json parse_json_text(const std::string& text, const std::string& source);

}  // namespace xbev::harness
