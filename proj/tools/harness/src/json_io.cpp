// SPDX-License-Identifier: Apache-2.0

#include "xbev/harness/json_io.hpp"

#include <set>

#include "xbev/error.hpp"

namespace xbev::harness {
namespace {

[[noreturn]] void config_fail(const std::string& path, const std::string& message) {
  fail(ErrorKind::kConfig, path + ": " + message, path);
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::string index_path(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

// Reads fields of one JSON object and rejects anything it was not asked for.
class StrictObject {
 public:
  StrictObject(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) config_fail(path_.empty() ? "<root>" : path_, "expected an object");
  }
  ~StrictObject() = default;

  const json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const json& need(const std::string& key) {
    const json* v = find(key);
    if (v == nullptr) config_fail(join(path_, key), "missing required field");
    return *v;
  }

  template <typename T>
  void opt(const std::string& key, T& out) {
    if (const json* v = find(key)) out = as<T>(*v, join(path_, key));
  }

  template <typename T>
  T req(const std::string& key) {
    return as<T>(need(key), join(path_, key));
  }

  std::string path(const std::string& key) const { return join(path_, key); }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.contains(item.key())) config_fail(join(path_, item.key()), "unknown field");
    }
  }

  template <typename T>
  static T as(const json& v, const std::string& path) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) config_fail(path, "expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) config_fail(path, "expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) config_fail(path, "expected a number");
      return v.get<double>();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_unsigned()) config_fail(path, "expected a non-negative integer");
      return v.get<std::uint64_t>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) config_fail(path, "expected an integer");
      return v.get<T>();
    } else {
      static_assert(sizeof(T) == 0, "unsupported field type");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

const json& need_array(const json& v, const std::string& path) {
  if (!v.is_array()) config_fail(path, "expected an array");
  return v;
}

template <typename E>
E parse_enum(const std::string& value, const std::string& path,
             std::initializer_list<E> options) {
  for (E e : options) {
    if (to_string(e) == value) return e;
  }
  std::string allowed;
  for (E e : options) allowed += (allowed.empty() ? "" : ", ") + std::string(to_string(e));
  config_fail(path, "'" + value + "' is not one of {" + allowed + "}");
}

ScanOrder parse_scan(const std::string& value, const std::string& path) {
  const auto s = parse_scan_order(value);
  if (!s) config_fail(path, "unknown scan order '" + value + "'");
  return *s;
}

}  // namespace

json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kConfig, source + ": invalid JSON (" + e.what() + ")", source);
  }
}

json to_json(const TraversalOrder& order) {
  if (order.variant != TraversalOrder::Variant::kPatch) return std::string(to_string(order.variant));
  return json{{"variant", "patch"},
              {"patch_h", order.patch_h},
              {"patch_w", order.patch_w},
              {"inner", std::string(to_string(order.inner))},
              {"outer", std::string(to_string(order.outer))}};
}

TraversalOrder traversal_from_json(const json& j, const std::string& path) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    const auto variant = parse_traversal_variant(name);
    if (!variant || *variant == TraversalOrder::Variant::kPatch) {
      config_fail(path, "unknown traversal '" + name + "' (patch orders need an object)");
    }
    return TraversalOrder{*variant};
  }
  StrictObject o(j, path);
  const auto variant = o.req<std::string>("variant");
  if (variant != "patch") config_fail(o.path("variant"), "object traversals must be 'patch'");
  TraversalOrder t = TraversalOrder::patch(o.req<int>("patch_h"), o.req<int>("patch_w"),
                                           ScanOrder::kRowMajor, ScanOrder::kRowMajor);
  if (const json* v = o.find("inner")) t.inner = parse_scan(StrictObject::as<std::string>(*v, o.path("inner")), o.path("inner"));
  if (const json* v = o.find("outer")) t.outer = parse_scan(StrictObject::as<std::string>(*v, o.path("outer")), o.path("outer"));
  o.finish();
  if (t.patch_h < 1 || t.patch_w < 1) config_fail(path, "patch sizes must be >= 1");
  return t;
}

json to_json(const LayerConfig& c) {
  json traversals = json::array();
  for (const auto& t : c.traversals) traversals.push_back(to_json(t));
  return json{{"dims",
               {{"model_dim", c.dims.model_dim},
                {"expand", c.dims.expand},
                {"heads", c.dims.heads},
                {"head_dim", c.dims.head_dim},
                {"state_dim", c.dims.state_dim},
                {"groups", c.dims.groups}}},
              {"merge_order", std::string(to_string(c.merge_order))},
              {"extract_order", std::string(to_string(c.extract_order))},
              {"zero_BQ", c.zero_BQ},
              {"zero_CV", c.zero_CV},
              {"zero_dtQ", c.zero_dtQ},
              {"norm_mode", std::string(to_string(c.norm_mode))},
              {"traversals", traversals},
              {"insertion_mode", std::string(to_string(c.insertion_mode))},
              {"conv_width", c.conv_width},
              {"dropout", c.dropout},
              {"insert_shift", c.insert_shift},
              {"dropout_seed", c.dropout_seed}};
}

LayerConfig layer_config_from_json(const json& j) {
  LayerConfig c;
  StrictObject o(j, "");
  if (const json* d = o.find("dims")) {
    StrictObject od(*d, "dims");
    od.opt("model_dim", c.dims.model_dim);
    od.opt("expand", c.dims.expand);
    od.opt("heads", c.dims.heads);
    od.opt("head_dim", c.dims.head_dim);
    od.opt("state_dim", c.dims.state_dim);
    od.opt("groups", c.dims.groups);
    od.finish();
  }
  if (const json* v = o.find("merge_order")) {
    c.merge_order = parse_enum(StrictObject::as<std::string>(*v, "merge_order"), "merge_order",
                               {MergeOrder::kBeforeConv, MergeOrder::kAfterConv});
  }
  if (const json* v = o.find("extract_order")) {
    c.extract_order = parse_enum(StrictObject::as<std::string>(*v, "extract_order"),
                                 "extract_order",
                                 {ExtractOrder::kBeforeGate, ExtractOrder::kAfterGate});
  }
  o.opt("zero_BQ", c.zero_BQ);
  o.opt("zero_CV", c.zero_CV);
  o.opt("zero_dtQ", c.zero_dtQ);
  if (const json* v = o.find("norm_mode")) {
    c.norm_mode = parse_enum(StrictObject::as<std::string>(*v, "norm_mode"), "norm_mode",
                             {NormMode::kAverage, NormMode::kRmsNorm, NormMode::kBoth,
                              NormMode::kNeither});
  }
  if (const json* v = o.find("traversals")) {
    need_array(*v, "traversals");
    c.traversals.clear();
    for (std::size_t i = 0; i < v->size(); ++i) {
      c.traversals.push_back(traversal_from_json((*v)[i], index_path("traversals", i)));
    }
    if (c.traversals.empty()) config_fail("traversals", "at least one traversal is required");
  }
  if (const json* v = o.find("insertion_mode")) {
    c.insertion_mode = parse_enum(StrictObject::as<std::string>(*v, "insertion_mode"),
                                  "insertion_mode",
                                  {InsertionMode::kProject, InsertionMode::kAppend,
                                   InsertionMode::kPrepend});
  }
  o.opt("conv_width", c.conv_width);
  o.opt("dropout", c.dropout);
  o.opt("insert_shift", c.insert_shift);
  o.opt("dropout_seed", c.dropout_seed);
  o.finish();

  if (c.conv_width < 1) config_fail("conv_width", "must be >= 1");
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) config_fail("dropout", "must be in [0, 1)");
  try {
    c.dims.validate();
  } catch (const Error& e) {
    config_fail("dims", e.what());
  }
  return c;
}

json to_json(const SceneSpec& s) {
  json cameras = json::array();
  for (const auto& cam : s.cameras) {
    cameras.push_back({{"proj", cam.proj}, {"img_w", cam.img_w}, {"img_h", cam.img_h}});
  }
  json levels = json::array();
  for (const auto& l : s.feature_levels) levels.push_back({{"H_f", l.H_f}, {"W_f", l.W_f}, {"D", l.D}});
  return json{{"seed", s.seed},
              {"cameras", cameras},
              {"bev",
               {{"H_bev", s.bev.H_bev},
                {"W_bev", s.bev.W_bev},
                {"extent",
                 {{"x_min", s.bev.extent.x_min},
                  {"x_max", s.bev.extent.x_max},
                  {"y_min", s.bev.extent.y_min},
                  {"y_max", s.bev.extent.y_max}}},
                {"pillar_z", s.bev.pillar_z}}},
              {"feature_levels", levels},
              {"value_init",
               {{"distribution", s.value_init.distribution},
                {"mean", s.value_init.mean},
                {"std", s.value_init.std}}},
              {"queries_file", s.queries_file},
              {"feature_files", s.feature_files}};
}

SceneSpec scene_from_json(const json& j) {
  SceneSpec s;
  StrictObject o(j, "");
  s.seed = o.req<std::uint64_t>("seed");

  const json& cams = need_array(o.need("cameras"), "cameras");
  s.cameras.clear();
  for (std::size_t i = 0; i < cams.size(); ++i) {
    const std::string p = index_path("cameras", i);
    StrictObject oc(cams[i], p);
    CameraModel cam;
    const json& proj = need_array(oc.need("proj"), oc.path("proj"));
    if (proj.size() != 16) config_fail(oc.path("proj"), "expected 16 numbers (row-major 4x4)");
    for (std::size_t k = 0; k < 16; ++k) {
      cam.proj[k] = StrictObject::as<double>(proj[k], index_path(oc.path("proj"), k));
    }
    cam.img_w = oc.req<int>("img_w");
    cam.img_h = oc.req<int>("img_h");
    oc.finish();
    s.cameras.push_back(cam);
  }

  {
    StrictObject ob(o.need("bev"), "bev");
    s.bev.H_bev = ob.req<int>("H_bev");
    s.bev.W_bev = ob.req<int>("W_bev");
    StrictObject oe(ob.need("extent"), "bev.extent");
    s.bev.extent.x_min = oe.req<double>("x_min");
    s.bev.extent.x_max = oe.req<double>("x_max");
    s.bev.extent.y_min = oe.req<double>("y_min");
    s.bev.extent.y_max = oe.req<double>("y_max");
    oe.finish();
    const json& pz = need_array(ob.need("pillar_z"), "bev.pillar_z");
    s.bev.pillar_z.clear();
    for (std::size_t k = 0; k < pz.size(); ++k) {
      s.bev.pillar_z.push_back(StrictObject::as<double>(pz[k], index_path("bev.pillar_z", k)));
    }
    ob.finish();
  }

  const json& levels = need_array(o.need("feature_levels"), "feature_levels");
  s.feature_levels.clear();
  for (std::size_t i = 0; i < levels.size(); ++i) {
    StrictObject ol(levels[i], index_path("feature_levels", i));
    s.feature_levels.push_back({ol.req<int>("H_f"), ol.req<int>("W_f"), ol.req<int>("D")});
    ol.finish();
  }

  if (const json* v = o.find("value_init")) {
    StrictObject ov(*v, "value_init");
    ov.opt("distribution", s.value_init.distribution);
    ov.opt("mean", s.value_init.mean);
    ov.opt("std", s.value_init.std);
    ov.finish();
  }
  o.opt("queries_file", s.queries_file);
  const json& files = need_array(o.need("feature_files"), "feature_files");
  s.feature_files.clear();
  for (std::size_t c = 0; c < files.size(); ++c) {
    const std::string p = index_path("feature_files", c);
    const json& row = need_array(files[c], p);
    std::vector<std::string> names;
    for (std::size_t l = 0; l < row.size(); ++l) {
      names.push_back(StrictObject::as<std::string>(row[l], index_path(p, l)));
    }
    s.feature_files.push_back(std::move(names));
  }
  o.finish();
  s.validate();
  return s;
}

json to_json(const ComplexityConfig& c) {
  return json{{"bev_h", c.bev_h},
              {"bev_w", c.bev_w},
              {"img_w", c.img_w},
              {"img_h", c.img_h},
              {"stride", c.stride},
              {"cameras", c.cameras},
              {"pillars", c.pillars},
              {"model_dim", c.model_dim},
              {"expand", c.expand},
              {"heads", c.heads},
              {"state_dim", c.state_dim},
              {"groups", c.groups},
              {"conv_width", c.conv_width},
              {"offsets", c.offsets},
              {"attn_heads", c.attn_heads},
              {"bytes_per_value", c.bytes_per_value}};
}

ComplexityConfig complexity_config_from_json(const json& j) {
  ComplexityConfig c;
  StrictObject o(j, "");
  o.opt("bev_h", c.bev_h);
  o.opt("bev_w", c.bev_w);
  o.opt("img_w", c.img_w);
  o.opt("img_h", c.img_h);
  o.opt("stride", c.stride);
  o.opt("cameras", c.cameras);
  o.opt("pillars", c.pillars);
  o.opt("model_dim", c.model_dim);
  o.opt("expand", c.expand);
  o.opt("heads", c.heads);
  o.opt("state_dim", c.state_dim);
  o.opt("groups", c.groups);
  o.opt("conv_width", c.conv_width);
  o.opt("offsets", c.offsets);
  o.opt("attn_heads", c.attn_heads);
  o.opt("bytes_per_value", c.bytes_per_value);
  o.finish();
  c.validate();
  return c;
}

}  // namespace xbev::harness
