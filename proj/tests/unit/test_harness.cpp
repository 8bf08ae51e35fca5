// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>

#include "support.hpp"
#include "xbev/harness/checks.hpp"
#include "xbev/harness/io.hpp"
#include "xbev/harness/json_io.hpp"
#include "xbev/harness/report.hpp"
#include "xbev/harness/scene.hpp"
#include "xbev/harness/verify.hpp"

namespace xbev::harness {
namespace {

TEST(TensorFormat, LayoutIsMagicRankDimsPayload) {
  const Tensor t{{2, 1}, {1.0f, -2.5f}};
  const auto bytes = encode_tensor(t);
  ASSERT_EQ(bytes.size(), 4U + 4 + 8 + 8);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "XBEV");
  EXPECT_EQ(bytes[4], 2);  // rank, little-endian
  EXPECT_EQ(bytes[8], 2);
  EXPECT_EQ(bytes[12], 1);
  EXPECT_EQ(bytes[16 + 3], 0x3f);  // 1.0f = 0x3f800000
  EXPECT_EQ(decode_tensor(bytes, "t"), t);
}

TEST(TensorFormat, SHA256OfKnownInput) {
  const std::vector<std::uint8_t> abc{'a', 'b', 'c'};
  EXPECT_EQ(sha256_hex(abc), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(TensorFormat, BadMagicNamesFile) {
  const auto dir = test::scratch_dir("bad-magic");
  const auto path = dir / "bad.xbev";
  auto bytes = encode_tensor(Tensor{{1}, {1.0f}});
  bytes[0] = 'Y';
  write_bytes(path, bytes);
  const Error e = test::catch_error([&] { read_tensor(path); });
  EXPECT_EQ(e.kind(), ErrorKind::kIo);
  EXPECT_EQ(e.detail(), path.string());
  EXPECT_NE(std::string(e.what()).find("bad.xbev"), std::string::npos);
}

TEST(TensorFormat, TruncatedAndMissing) {
  const auto dir = test::scratch_dir("truncated");
  auto bytes = encode_tensor(Tensor{{3}, {1.0f, 2.0f, 3.0f}});
  bytes.resize(bytes.size() - 2);
  write_bytes(dir / "t.xbev", bytes);
  EXPECT_EQ(test::catch_error([&] { read_tensor(dir / "t.xbev"); }).kind(), ErrorKind::kIo);
  const Error missing = test::catch_error([&] { read_tensor(dir / "nope.xbev"); });
  EXPECT_EQ(missing.kind(), ErrorKind::kIo);
  EXPECT_EQ(missing.detail(), (dir / "nope.xbev").string());
}

TEST(LayerConfigJson, RoundTripAndStrictFields) {
  LayerConfig c;
  c.norm_mode = NormMode::kRmsNorm;
  c.traversals = {TraversalOrder::column_major(),
                  TraversalOrder::patch(2, 4, ScanOrder::kRowSnake, ScanOrder::kColumnMajor)};
  c.insert_shift = -3;
  EXPECT_EQ(layer_config_from_json(to_json(c)), c);

  auto j = to_json(c);
  j["dims"]["state_dmi"] = 3;
  const Error e = test::catch_error([&] { layer_config_from_json(j); });
  EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  EXPECT_EQ(e.detail(), "dims.state_dmi");

  j = to_json(c);
  j["norm_mode"] = "layernorm";
  EXPECT_EQ(test::catch_error([&] { layer_config_from_json(j); }).detail(), "norm_mode");

  j = to_json(c);
  j["traversals"][0] = "hilbert";
  EXPECT_EQ(test::catch_error([&] { layer_config_from_json(j); }).kind(), ErrorKind::kConfig);
}

TEST(LayerConfigJson, FieldNames) {
  const auto j = to_json(LayerConfig{});
  for (const char* key : {"dims", "merge_order", "extract_order", "zero_BQ", "zero_CV", "zero_dtQ",
                          "norm_mode", "traversals", "insertion_mode"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["traversals"][0], "row_snake");
  EXPECT_EQ(j["merge_order"], "after_conv");
}

TEST(SceneJson, RoundTripAndZeroCameras) {
  const SceneSpec s = make_scene_spec(GenSceneOptions{});
  EXPECT_EQ(scene_from_json(parse_json_text(to_json(s).dump(), "s")), s);
  auto j = to_json(s);
  j["cameras"] = nlohmann::json::array();
  const Error e = test::catch_error([&] { scene_from_json(j); });
  EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  EXPECT_EQ(e.detail(), "cameras");
  GenSceneOptions none;
  none.cameras = 0;
  EXPECT_EQ(test::catch_error([&] { make_scene_spec(none); }).kind(), ErrorKind::kConfig);
}

TEST(SceneJson, SyntaxErrorIsConfigError) {
  EXPECT_EQ(test::catch_error([] { parse_json_text("{\"seed\": ", "scene.json"); }).kind(),
            ErrorKind::kConfig);
}

TEST(GenScene, SameSeedSameBytes) {
  const auto a = test::scratch_dir("gen-a");
  const auto b = test::scratch_dir("gen-b");
  GenSceneOptions o;
  o.seed = 42;
  gen_scene(o, a);
  gen_scene(o, b);
  for (const auto& entry : std::filesystem::directory_iterator(a)) {
    const auto name = entry.path().filename();
    EXPECT_EQ(sha256_file(entry.path()), sha256_file(b / name)) << name;
  }
  const LoadedScene loaded = load_scene(a);
  const LoadedScene memory = generate_scene(o);
  EXPECT_EQ(loaded.queries, memory.queries);
  EXPECT_EQ(loaded.features[2][0].values, memory.features[2][0].values);
}

TEST(GenScene, DifferentSeedsDiffer) {
  GenSceneOptions a;
  GenSceneOptions b;
  b.seed = 43;
  EXPECT_NE(generate_scene(a).queries, generate_scene(b).queries);
}

TEST(GenScene, DisjointRigHitStatistics) {
  GenSceneOptions o;
  o.img_w = 1600;
  o.img_h = 900;
  o.H_bev = 50;
  o.W_bev = 50;
  o.extent = BevExtent{};
  o.yaw0 = 0.3;
  const SceneSpec s = make_scene_spec(o);
  const auto refs = build_reference_points(s.bev, s.cameras);
  for (std::size_t q = 0; q < refs.queries; ++q) {
    for (std::size_t z = 0; z < refs.pillars; ++z) {
      std::size_t n = 0;
      for (std::size_t c = 0; c < refs.cameras; ++c) n += refs.hit(c, q, z);
      EXPECT_LE(n, 1U);
    }
  }
  EXPECT_TRUE(check_disjoint_fov(10, 6, 99).passed);
}

TEST(ComplexityReport, CsvColumnsAndJson) {
  const std::vector<ComplexityReport> r{complexity_report(ComplexityConfig{})};
  const std::string csv = report_csv(r);
  EXPECT_NE(csv.find("module,Q,V,params,flops,est_memory_bytes\n"), std::string::npos);
  EXPECT_NE(csv.find("\nxqssm,2500,375,"), std::string::npos);
  const auto j = report_json(r);
  EXPECT_EQ(j["reports"][0]["modules"].size(), 3U);
  EXPECT_EQ(complexity_config_from_json(to_json(ComplexityConfig{})).model_dim, 256U);
  EXPECT_EQ(test::catch_error([] { complexity_config_from_json(nlohmann::json{{"bev", 3}}); }).detail(),
            "bev");
}

TEST(Verify, FastLevelScanChecksPass) {
  const VerifyReport r = verify_suite(VerifyLevel::kFast, 1, test::scratch_dir("verify-fast"));
  for (const auto& c : r.checks) {
    if (c.name == "scan_duality" || c.name == "hydra_quasiseparable" ||
        c.name == "xqssm_vs_generic_scan" || c.name == "merge_oracle") {
      EXPECT_TRUE(c.passed) << c.name << ": " << c.detail;
    }
  }
  const auto j = r.to_json();
  EXPECT_EQ(j["level"], "fast");
  EXPECT_EQ(j["checks"].size(), r.checks.size());
  EXPECT_EQ(j["passed"], r.all_passed());
}

TEST(Verify, FullLevelFuzzesMergeThousandTimes) {
  const VerifyReport r = verify_suite(VerifyLevel::kFull, 2, test::scratch_dir("verify-full"));
  bool found = false;
  for (const auto& c : r.checks) {
    if (c.name != "merge_oracle") continue;
    found = true;
    EXPECT_EQ(c.instances, 1000U);
    EXPECT_TRUE(c.passed) << c.detail;
  }
  EXPECT_TRUE(found);
  EXPECT_EQ(r.flop_samples.size(), 20U);
}

}  // namespace
}  // namespace xbev::harness
