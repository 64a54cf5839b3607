// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <sstream>

#include "support.hpp"
#include "v3dg/bench.hpp"
#include "v3dg/bundle.hpp"
#include "v3dg/error.hpp"
#include "v3dg/ply.hpp"
#include "v3dg/scene_file.hpp"

using namespace v3dg;

namespace {

// Writes a float-only binary PLY with the given property names and rows.
void write_raw_ply(const std::filesystem::path& path, const std::vector<std::string>& names,
                   const std::vector<std::vector<float>>& rows) {
  std::ofstream out(path, std::ios::binary);
  out << "ply\nformat binary_little_endian 1.0\nelement vertex " << rows.size() << "\n";
  for (const auto& n : names) out << "property float " << n << "\n";
  out << "end_header\n";
  for (const auto& r : rows) out.write(reinterpret_cast<const char*>(r.data()), r.size() * sizeof(float));
}

const std::vector<std::string> kPlyNames = {"x",       "y",       "z",       "f_dc_0", "f_dc_1",
                                            "f_dc_2",  "opacity", "scale_0", "scale_1", "scale_2",
                                            "rot_0",   "rot_1",   "rot_2",   "rot_3"};

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::kArgument;
}

}  // namespace

TEST(Ply, RoundtripWithinTolerance) {
  test::TempDir dir("ply");
  const GaussianSet gs = test::random_set(10, 11);
  write_ply(gs, dir / "a.ply");
  const GaussianSet back = load_ply(dir / "a.ply");
  ASSERT_EQ(back.size(), gs.size());
  for (std::size_t i = 0; i < gs.size(); ++i) {
    const Gaussian3D a = gs.get(i), b = back.get(i);
    EXPECT_LE((a.position - b.position).cwiseAbs().maxCoeff(), 1e-6f);
    EXPECT_LE((a.scale - b.scale).cwiseAbs().maxCoeff(), 1e-6f);
    EXPECT_LE((a.rotation - b.rotation).cwiseAbs().maxCoeff(), 1e-6f);
    EXPECT_LE(std::abs(a.opacity - b.opacity), 1e-6f);
    EXPECT_LE((a.color - b.color).cwiseAbs().maxCoeff(), 1e-6f);
  }
}

TEST(Ply, Activations) {
  test::TempDir dir("ply");
  write_raw_ply(dir / "a.ply", kPlyNames, {{0, 0, 0, 0, 0, 0, 0.0f, 0, std::log(2.0f), 0, 2, 0, 0, 0}});
  const Gaussian3D g = load_ply(dir / "a.ply").get(0);
  EXPECT_FLOAT_EQ(g.opacity, 0.5f);
  EXPECT_EQ(g.color, Eigen::Vector3f(0.5f, 0.5f, 0.5f));
  EXPECT_FLOAT_EQ(g.scale.y(), 2.0f);
  EXPECT_FLOAT_EQ(g.scale.x(), 1.0f);
  EXPECT_EQ(g.rotation, QuatWxyz(1, 0, 0, 0));
}

TEST(Ply, ColorClampedAtZeroOnly) {
  test::TempDir dir("ply");
  write_raw_ply(dir / "a.ply", kPlyNames, {{0, 0, 0, -10, 10, 0, 0, 0, 0, 0, 1, 0, 0, 0}});
  const Gaussian3D g = load_ply(dir / "a.ply").get(0);
  EXPECT_EQ(g.color.x(), 0.0f);
  EXPECT_GT(g.color.y(), 1.0f);
}

TEST(Ply, ExtraPropertiesAreSkipped) {
  test::TempDir dir("ply");
  std::vector<std::string> names = kPlyNames;
  names.insert(names.begin() + 3, {"nx", "ny", "nz"});
  names.push_back("f_rest_0");
  write_raw_ply(dir / "a.ply", names, {{1, 2, 3, 9, 9, 9, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 7}});
  const Gaussian3D g = load_ply(dir / "a.ply").get(0);
  EXPECT_EQ(g.position, Eigen::Vector3f(1, 2, 3));
  EXPECT_FLOAT_EQ(g.opacity, 0.5f);
}

TEST(Ply, MissingPropertyIsNamed) {
  test::TempDir dir("ply");
  std::vector<std::string> names = kPlyNames;
  names.erase(names.begin() + 6);  // opacity
  write_raw_ply(dir / "a.ply", names, {std::vector<float>(names.size(), 0.0f)});
  try {
    load_ply(dir / "a.ply");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kFormat);
    EXPECT_NE(std::string(e.what()).find("opacity"), std::string::npos);
  }
}

TEST(Ply, NonFiniteAfterActivationNamesRow) {
  test::TempDir dir("ply");
  std::vector<std::vector<float>> rows(3, std::vector<float>{0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0});
  rows[2][7] = 1000.0f;  // exp overflows
  write_raw_ply(dir / "a.ply", kPlyNames, rows);
  try {
    load_ply(dir / "a.ply");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kData);
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos);
  }
}

TEST(Ply, MissingFileIsIoError) {
  EXPECT_EQ(kind_of([] { load_ply("/nonexistent/x.ply"); }), ErrorKind::kIo);
}

TEST(Bundle, RoundtripThreeLayers) {
  const Bundle b = test::quick_bundle(64, 16, 2, 3);
  ASSERT_EQ(b.layer_count, 3u);
  EXPECT_TRUE(validate_bundle(b).empty());
  EXPECT_EQ(deserialize_bundle(serialize_bundle(b)), b);

  test::TempDir dir("bundle");
  write_bundle(b, dir / "b.v3dg");
  EXPECT_EQ(read_bundle(dir / "b.v3dg"), b);
}

TEST(Bundle, RandomRoundtripsAreBitwise) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 20; ++i) {
    const auto n = static_cast<std::size_t>(1 + rng() % 200);
    const auto cs = static_cast<std::uint32_t>(2 + rng() % 30);
    const auto gsz = static_cast<std::uint32_t>(2 + rng() % 3);
    const Bundle b = test::quick_bundle(n, cs, gsz, rng());
    const auto bytes = serialize_bundle(b);
    EXPECT_EQ(bytes.size(), serialized_size(b.clusters.size(), b.gaussians.size()));
    EXPECT_EQ(deserialize_bundle(bytes), b);
    EXPECT_EQ(serialize_bundle(deserialize_bundle(bytes)), bytes);
  }
}

TEST(Bundle, SizeFormula) {
  const Bundle b = test::quick_bundle(4096, 4096, 2, 5);
  ASSERT_EQ(b.clusters.size(), 1u);
  // Magic and version, 48-byte header, header CRC, one cluster record,
  // 14 float32 per Gaussian, trailing CRC.
  const std::uint64_t expect = 8 + 48 + 4 + 48 * 1 + 14 * 4 * 4096 + 4;
  EXPECT_EQ(serialize_bundle(b).size(), expect);
  EXPECT_EQ(serialized_size(1, 4096), expect);
}

TEST(Bundle, EveryHeaderByteCorruptionIsDetected) {
  const auto bytes = serialize_bundle(test::quick_bundle(64, 16, 2, 6));
  for (std::size_t i = 0; i < 8 + 48 + 4; ++i) {
    auto bad = bytes;
    bad[i] ^= 0x5A;
    const ErrorKind kind = kind_of([&] { deserialize_bundle(bad); });
    EXPECT_EQ(kind, i < 8 ? ErrorKind::kFormat : ErrorKind::kCorruption) << "byte " << i;
  }
}

TEST(Bundle, BodyCorruptionTruncationAndTrailingBytes) {
  const auto bytes = serialize_bundle(test::quick_bundle(64, 16, 2, 7));
  auto bad = bytes;
  bad[bad.size() - 20] ^= 0x01;
  EXPECT_EQ(kind_of([&] { deserialize_bundle(bad); }), ErrorKind::kCorruption);

  auto shorter = bytes;
  shorter.resize(bytes.size() - 10);
  EXPECT_EQ(kind_of([&] { deserialize_bundle(shorter); }), ErrorKind::kIo);
  shorter.resize(30);
  EXPECT_EQ(kind_of([&] { deserialize_bundle(shorter); }), ErrorKind::kIo);

  auto longer = bytes;
  longer.push_back(0);
  EXPECT_EQ(kind_of([&] { deserialize_bundle(longer); }), ErrorKind::kCorruption);
}

TEST(Bundle, InvariantViolationNamesInvariant) {
  Bundle b = test::quick_bundle(64, 16, 2, 8);
  b.clusters[0].parent.radius = 0.0;
  const auto problems = validate_bundle(b);
  ASSERT_FALSE(problems.empty());
  EXPECT_NE(problems.front().find("r_p > r_c"), std::string::npos);
  try {
    deserialize_bundle(serialize_bundle(b));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kCorruption);
    EXPECT_NE(std::string(e.what()).find("r_p > r_c"), std::string::npos);
  }
}

TEST(Bundle, ValidatorCatchesEachInvariant) {
  const Bundle good = test::quick_bundle(64, 16, 2, 9);
  auto first_problem = [](const Bundle& b) {
    const auto p = validate_bundle(b);
    return p.empty() ? std::string() : p.front();
  };
  Bundle b = good;
  b.clusters[1].offset += 1;
  EXPECT_NE(first_problem(b).find("range coverage"), std::string::npos);
  b = good;
  b.params.gaussians_per_cluster = 8;
  EXPECT_NE(first_problem(b).find("cluster size"), std::string::npos);
  b = good;
  b.clusters[0].own.radius = 0.5;
  EXPECT_FALSE(validate_bundle(b).empty());
  b = good;
  b.clusters[0].parent.center += Eigen::Vector3d(100, 0, 0);
  EXPECT_NE(first_problem(b).find("enclosure"), std::string::npos);
  b = good;
  b.clusters.back().parent.radius = 5.0;
  EXPECT_NE(first_problem(b).find("top sentinel"), std::string::npos);
  b = good;
  b.gaussians.opacities[3] = 2.0f;
  EXPECT_NE(first_problem(b).find("gaussian row"), std::string::npos);
}

TEST(SceneFile, MinimalDefaults) {
  const Scene s = parse_scene(R"({"assets": {"a": "a.v3dg"}, "instances": [{"asset": "a"}]})", "/base");
  ASSERT_EQ(s.instances.size(), 1u);
  EXPECT_EQ(s.assets.at("a"), std::filesystem::path("/base/a.v3dg"));
  EXPECT_TRUE(s.instances[0].is_identity());
  EXPECT_EQ(s.instances[0].translation, Eigen::Vector3d::Zero());
  EXPECT_EQ(s.instances[0].scale, 1.0);
}

TEST(SceneFile, GridRoundtrip) {
  test::TempDir dir("scene");
  Scene s;
  s.assets["tree"] = dir / "tree.v3dg";
  s.instances = grid_instances("tree", 20, 20, 2.5, 0.5, 1.5, 42);
  write_scene(s, dir / "grid.json");
  const Scene back = load_scene(dir / "grid.json");
  ASSERT_EQ(back.instances.size(), 400u);
  for (std::size_t i = 0; i < 400; ++i) {
    const int r = static_cast<int>(i) / 20, c = static_cast<int>(i) % 20;
    EXPECT_NEAR(back.instances[i].translation.x(), (c - 9.5) * 2.5, 1e-12);
    EXPECT_NEAR(back.instances[i].translation.y(), (r - 9.5) * 2.5, 1e-12);
    EXPECT_NEAR(back.instances[i].scale, s.instances[i].scale, 1e-15);
    EXPECT_TRUE(back.instances[i].rotation.isApprox(s.instances[i].rotation, 1e-15));
  }
}

TEST(SceneFile, UnknownAssetIsNamed) {
  try {
    parse_scene(R"({"assets": {"a": "a.v3dg"}, "instances": [{"asset": "ghost"}]})", ".");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kReference);
    EXPECT_NE(std::string(e.what()).find("ghost"), std::string::npos);
  }
}

TEST(SceneFile, BadValues) {
  EXPECT_EQ(kind_of([] { parse_scene(R"({"assets": {"a": "x"}, "instances": [{"asset": "a", "scale": 0}]})", "."); }),
            ErrorKind::kValidation);
  EXPECT_EQ(kind_of([] { parse_scene(R"({"assets": {"a": "x"}, "instances": [{"asset": "a", "scale": -2}]})", "."); }),
            ErrorKind::kValidation);
  EXPECT_EQ(kind_of([] { parse_scene("{not json", "."); }), ErrorKind::kFormat);
  EXPECT_EQ(kind_of([] {
              parse_scene(R"({"assets": {"a": "x"}, "instances": [{"asset": "a", "translation": [1, 2]}]})", ".");
            }),
            ErrorKind::kValidation);
}
