#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "test_util.hpp"
#include "uvsel/bundle.hpp"
#include "uvsel/image.hpp"

using namespace uvsel;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
};

Result cli(const std::string& args) {
  const std::string cmd = std::string(UVSEL_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) throw std::runtime_error("popen failed");
  std::string out;
  char buf[4096];
  while (auto n = fread(buf, 1, sizeof buf, p)) out.append(buf, n);
  const int status = pclose(p);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

const char* kSpec = R"({"archetype": "tabletop", "object_count": 2, "first_object_tube": true,
  "corruption": {"boundary_dilate_px": 1, "fine_feature_dropout": true, "noise_px": 40}})";

}  // namespace

TEST(Cli, GenIsReproducible) {
  testutil::TempDir dir("cli");
  write(dir.path() / "spec.json", kSpec);
  const auto spec = (dir.path() / "spec.json").string();
  ASSERT_EQ(cli("gen --spec " + spec + " --seed 3 --out " + (dir.path() / "a").string()).code, 0);
  ASSERT_EQ(cli("gen --spec " + spec + " --seed 3 --out " + (dir.path() / "b").string()).code, 0);
  EXPECT_TRUE(validate_bundle(dir.path() / "a").empty());
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir.path() / "a")) {
    if (!e.is_regular_file()) continue;
    ++files;
    const auto rel = fs::relative(e.path(), dir.path() / "a");
    EXPECT_EQ(slurp(e.path()), slurp(dir.path() / "b" / rel)) << rel;
  }
  EXPECT_GE(files, 5u);
}

TEST(Cli, RunAndScore) {
  testutil::TempDir dir("cli");
  write(dir.path() / "spec.json", kSpec);
  const auto scene = (dir.path() / "scene").string();
  ASSERT_EQ(cli("gen --spec " + (dir.path() / "spec.json").string() + " --seed 3 --out " + scene).code, 0);
  const auto run = (dir.path() / "run").string();
  const auto r = cli("run --scene " + scene + " --out " + run);
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("waypoints:"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir.path() / "run" / "waypoints.json"));

  // Perfect predictions: the visible target and the union of the objects.
  const auto gt = *load_bundle(scene).ground_truth;
  const auto perfect = dir.path() / "perfect";
  fs::create_directories(perfect / "masks");
  std::vector<BinaryMask> objs;
  for (const auto& o : gt.objects) objs.push_back(o.mask);
  write_png(perfect / "masks" / "eroded_target.png", gt.visible_target);
  write_png(perfect / "masks" / "non_target.png", unite(objs));
  const auto s = cli("score --run " + perfect.string() + " --scene " + scene);
  ASSERT_EQ(s.code, 0);
  std::istringstream in(s.out);
  nlohmann::json j;
  in >> j;
  EXPECT_EQ(j.at("with_ntm").at("T").get<double>(), 1.0);
  EXPECT_EQ(j.at("with_ntm").at("NT").get<double>(), 1.0);
  EXPECT_EQ(j.at("without_ntm").at("NT").get<double>(), 1.0);
}

TEST(Cli, ExitCodes) {
  testutil::TempDir dir("cli");
  write(dir.path() / "spec.json", R"({"archetype": "railing", "object_count": 1})");
  const auto scene = (dir.path() / "scene").string();
  ASSERT_EQ(cli("gen --spec " + (dir.path() / "spec.json").string() + " --out " + scene).code, 0);
  const auto out = " --out " + (dir.path() / "run").string();

  write(dir.path() / "sofa.json", R"({"target_prompt": "sofa"})");
  EXPECT_EQ(cli("run --scene " + scene + " --config " + (dir.path() / "sofa.json").string() + out).code, 2);

  write(dir.path() / "bad.json", R"({"selection": {"v_t_m": -1}})");
  EXPECT_EQ(cli("run --scene " + scene + " --config " + (dir.path() / "bad.json").string() + out).code, 3);
  EXPECT_EQ(cli("run --scene " + (dir.path() / "nowhere").string() + out).code, 3);
  EXPECT_EQ(cli("run --scene " + scene + " --backend carrier-pigeon" + out).code, 3);
  EXPECT_EQ(cli("frobnicate").code, 3);
  EXPECT_EQ(cli("--help").code, 0);

  EXPECT_EQ(cli("run --scene " + scene + " --backend remote --endpoint http://127.0.0.1:1" + out).code, 4);
}

TEST(Cli, Bench) {
  testutil::TempDir dir("cli");
  for (const char* arch : {"tabletop", "chair"}) {
    const auto spec = dir.path() / (std::string(arch) + ".json");
    write(spec, std::string(R"({"object_count": 2, "first_object_tube": true,
      "corruption": {"fine_feature_dropout": true}, "archetype": ")") + arch + "\"}");
    ASSERT_EQ(cli("gen --spec " + spec.string() + " --out " + (dir.path() / "suite" / arch).string()).code, 0);
  }
  const auto r = cli("bench --suite " + (dir.path() / "suite").string());
  ASSERT_EQ(r.code, 0);
  for (const char* row : {"tabletop", "chair", "planted", "all"}) {
    EXPECT_NE(r.out.find(row), std::string::npos) << row;
  }
}
