// SPDX-License-Identifier: Apache-2.0
// Drives the v3dg executable end to end.
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "support.hpp"
#include "v3dg/bench.hpp"
#include "v3dg/bundle.hpp"
#include "v3dg/ply.hpp"

using namespace v3dg;

namespace {

struct CliRun {
  int code = -1;
  std::string output;
};

class Cli : public ::testing::Test {
 protected:
  test::TempDir dir{"cli"};

  std::string path(const std::string& name) const { return (dir.path() / name).string(); }

  CliRun run(const std::string& args, const std::string& env = "") const {
    const std::string log = path("out.log");
    const std::string cmd = env + " " + V3DG_CLI_PATH + " " + args + " > " + log + " 2>&1";
    const int status = std::system(cmd.c_str());
    CliRun r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(log);
    std::ostringstream os;
    os << in.rdbuf();
    r.output = os.str();
    return r;
  }

  static std::vector<char> bytes(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }

  // 512 Gaussians, clusters of 64: four layers.
  void make_fixture() {
    ASSERT_EQ(run("synth " + path("a.ply") + " --count 512 --seed 3").code, 0);
    const CliRun b = run("build " + path("a.ply") + " " + path("a.v3dg") + " --cluster-size 64 --iterations 5 --quiet");
    ASSERT_EQ(b.code, 0) << b.output;
    ASSERT_EQ(run("grid-scene " + path("s.json") + " --bundle " + path("a.v3dg") + " --rows 2 --cols 2").code, 0);
  }
};

}  // namespace

TEST_F(Cli, BuildThenInfo) {
  make_fixture();
  const CliRun info = run("info " + path("a.v3dg"));
  EXPECT_EQ(info.code, 0) << info.output;
  EXPECT_NE(info.output.find("invariants: ok"), std::string::npos);
  EXPECT_NE(info.output.find("cluster size 64"), std::string::npos);
  const Bundle b = read_bundle(path("a.v3dg"));
  EXPECT_EQ(b.layer_count, 4u);
  EXPECT_EQ(b.params.simplify_iterations, 5u);
}

TEST_F(Cli, MissingInputIsNamed) {
  const CliRun r = run("build " + path("nope.ply") + " " + path("x.v3dg"));
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.output.find("nope.ply"), std::string::npos) << r.output;
  EXPECT_FALSE(std::filesystem::exists(path("x.v3dg")));
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("build only-one-arg").code, 1);
  EXPECT_EQ(run("info x", "V3DG_THREADS=zero").code, 1);
  const CliRun help = run("--help");
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.output.find("build"), std::string::npos);
}

TEST_F(Cli, ZeroIterationsIsFaster) {
  ASSERT_EQ(run("synth " + path("a.ply") + " --count 2048 --seed 4").code, 0);
  auto timed = [&](int iters) {
    const auto t = std::chrono::steady_clock::now();
    const CliRun r = run("build " + path("a.ply") + " " + path("b.v3dg") + " --cluster-size 256 --quiet --iterations " +
                      std::to_string(iters));
    EXPECT_EQ(r.code, 0) << r.output;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
  };
  const double zero = timed(0);
  const double many = timed(60);
  EXPECT_LT(zero, many);
}

TEST_F(Cli, RenderModes) {
  make_fixture();
  const std::string base = "render " + path("s.json") + " ";
  ASSERT_EQ(run(base + path("tau0.png") + " --tau 0").code, 0);
  ASSERT_EQ(run(base + path("van.png") + " --mode vanilla").code, 0);
  EXPECT_EQ(bytes(path("tau0.png")), bytes(path("van.png")));

  const CliRun top = run(base + path("top.png") + " --tau 1e18");
  ASSERT_EQ(top.code, 0);
  const Bundle b = read_bundle(path("a.v3dg"));
  const std::size_t top_count = 4 * b.gaussians_in_layer(b.layer_count - 1);
  EXPECT_NE(top.output.find("selected " + std::to_string(top_count) + " of " + std::to_string(4 * 512)),
            std::string::npos)
      << top.output;

  EXPECT_EQ(run(base + path("clip.png") + " --mode radius-clip --clip 3").code, 0);
  EXPECT_EQ(run(base + path("dbg.png") + " --mode layer-debug --tau 500 --frustum-cull").code, 0);
  EXPECT_EQ(run(base + path("cam.png") + " --camera 0,-8,3,0,0,0 --width 64 --height 32").code, 0);
  const auto png = bytes(path("cam.png"));
  ASSERT_GT(png.size(), 8u);
  EXPECT_EQ(std::memcmp(png.data(), "\x89PNG", 4), 0);
  EXPECT_EQ(run(base + path("x.png") + " --mode wireframe").code, 1);
  EXPECT_EQ(run(base + path("x.png") + " --tau -1").code, 1);
}

TEST_F(Cli, InfoRejectsCorruptedSphere) {
  make_fixture();
  auto raw = bytes(path("a.v3dg"));
  const std::size_t parent_radius = 8 + 48 + 4 + 44;  // first cluster record
  const float zero = 0.0f;
  std::memcpy(raw.data() + parent_radius, &zero, 4);
  std::ofstream(path("bad.v3dg"), std::ios::binary).write(raw.data(), static_cast<std::streamsize>(raw.size()));
  const CliRun r = run("info " + path("bad.v3dg"));
  EXPECT_NE(r.code, 0);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("r_p > r_c"), std::string::npos) << r.output;
}

TEST_F(Cli, BenchWritesCsv) {
  make_fixture();
  const CliRun r = run("bench " + path("s.json") + " --out " + path("b.csv") +
                    " --taus 0,1000 --distances 1 --ssaa 1");
  ASSERT_EQ(r.code, 0) << r.output;
  std::ifstream in(path("b.csv"));
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, kBenchCsvHeader);
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  EXPECT_EQ(rows, 4u * 5u * 1u * 2u);
  EXPECT_EQ(run("bench " + path("s.json") + " --taus 1,x").code, 1);
}

TEST_F(Cli, SynthWritesPly) {
  ASSERT_EQ(run("synth " + path("p.ply") + " --count 100 --seed 9").code, 0);
  EXPECT_EQ(load_ply(path("p.ply")).size(), 100u);
}
