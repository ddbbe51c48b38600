#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "test_util.hpp"
#include "uvsel/fixture_backend.hpp"
#include "uvsel/pipeline.hpp"
#include "uvsel/remote_backend.hpp"
#include "uvsel/synthscene.hpp"

using namespace uvsel;
namespace fs = std::filesystem;

namespace {

SceneBundle table_with(int count, bool planted, std::uint64_t seed) {
  auto spec = synth::archetype_spec("tabletop");
  synth::place_objects(spec, count, planted, seed);
  if (planted) spec.corruption = {1, true, 40};
  return synth::render(spec, seed);
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out[fs::relative(e.path(), root).string()] = ss.str();
  }
  return out;
}

}  // namespace

TEST(Pipeline, FlatTable) {
  const auto b = synth::render(synth::archetype_spec("tabletop"), 1);
  FixtureBackend backend(b.detections);
  testutil::TempDir dir("run");
  const auto r = run_pipeline(b, backend, PipelineConfig{}, dir.path());
  ASSERT_TRUE(r.target_found());
  EXPECT_EQ(r.target_prompt, "white table");
  ASSERT_FALSE(r.selection.clean.empty());
  EXPECT_EQ(r.waypoints.size(), r.normals.valid_count());
  EXPECT_EQ(r.normals.normals.size(), r.selection.clean.size());
  ASSERT_TRUE(r.min_clearance);
  EXPECT_GE(*r.min_clearance, PipelineConfig{}.selection.v_t);
  for (const auto& w : r.waypoints) {
    EXPECT_NEAR((w.position - w.surface_point).norm(), 0.0381, 1e-12);
    EXPECT_GT(w.position.z(), w.surface_point.z());  // facing the camera above
  }
  ASSERT_TRUE(r.tsp);
  EXPECT_LE(r.tsp->final_length, r.tsp->seed_length);
  ASSERT_TRUE(r.scores);
  EXPECT_EQ(r.scores->with_ntm.target, 1.0);

  for (const char* f : {"run.json", "timings.json", "waypoints.json", "scores.json", "scores.txt",
                        "masks/eroded_target.png", "masks/non_target.png", "clouds/clean.xyz",
                        "clouds/downsampled_non_target.xyz"}) {
    EXPECT_TRUE(fs::exists(dir.path() / f)) << f;
  }
  const auto wp = nlohmann::json::parse(std::ifstream(dir.path() / "waypoints.json"));
  EXPECT_EQ(wp.at("waypoints").size(), r.waypoints.size());
}

TEST(Pipeline, ZigzagOrdering) {
  const auto b = table_with(2, false, 3);
  FixtureBackend backend(b.detections);
  PipelineConfig c;
  c.planning.ordering = Ordering::zigzag;
  const auto r = run_pipeline(b, backend, c);
  EXPECT_FALSE(r.tsp);
  EXPECT_EQ(r.waypoints.size(), r.normals.valid_count());
}

TEST(Pipeline, TargetNotFound) {
  const auto b = table_with(1, false, 2);
  FixtureBackend backend(b.detections);
  PipelineConfig c;
  c.target_prompt = "sofa";
  testutil::TempDir dir("run");
  const auto r = run_pipeline(b, backend, c, dir.path());
  EXPECT_FALSE(r.target_found());
  EXPECT_TRUE(r.waypoints.empty());
  ASSERT_EQ(r.warnings.size(), 1u);
  const auto j = nlohmann::json::parse(std::ifstream(dir.path() / "run.json"));
  EXPECT_FALSE(j.at("target_found").get<bool>());
  EXPECT_FALSE(fs::exists(dir.path() / "waypoints.json"));
}

TEST(Pipeline, ObjectsKeepTheirBuffer) {
  const auto b = table_with(3, true, 9);
  FixtureBackend backend(b.detections);
  const auto r = run_pipeline(b, backend, PipelineConfig{});
  ASSERT_TRUE(r.min_clearance);
  EXPECT_GE(oracle::min_distance(r.selection.clean.points, r.selection.downsampled_non_target.points),
            0.07);
  ASSERT_TRUE(r.scores);
  EXPECT_GE(*r.scores->with_ntm.non_target(), *r.scores->without_ntm.non_target());
}

TEST(Pipeline, BitIdenticalArtifacts) {
  const auto b = table_with(3, true, 5);
  testutil::TempDir a("run"), c("run");
  FixtureBackend b1(b.detections), b2(b.detections);
  run_pipeline(b, b1, PipelineConfig{}, a.path());
  run_pipeline(b, b2, PipelineConfig{}, c.path());
  auto ta = read_tree(a.path()), tc = read_tree(c.path());
  ta.erase("timings.json");
  tc.erase("timings.json");
  EXPECT_GT(ta.size(), 10u);
  EXPECT_EQ(ta, tc);
}

TEST(Pipeline, StageErrors) {
  auto b = table_with(0, false, 1);
  FixtureBackend backend(b.detections);
  b.registered_to_color = false;
  try {
    run_pipeline(b, backend, PipelineConfig{});
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "validate");
    EXPECT_TRUE(e.validation());
    EXPECT_FALSE(e.transport());
  }

  b.registered_to_color = true;
  b.info.reset();
  try {
    run_pipeline(b, backend, PipelineConfig{});
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "validate");
    EXPECT_TRUE(e.validation());
  }

  PipelineConfig c;
  c.target_prompt = "white table";
  c.selection.v_t = 0.0;
  EXPECT_THROW(run_pipeline(b, backend, c), StageError);
}

TEST(Pipeline, DeadEndpointIsTransportError) {
  const auto b = table_with(0, false, 1);
  RemoteBackend backend("http://127.0.0.1:1", std::chrono::milliseconds(500));
  try {
    run_pipeline(b, backend, PipelineConfig{});
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "perception");
    EXPECT_TRUE(e.transport());
  }
}

TEST(Pipeline, MinDistance) {
  const PointCloud a{{Vec3(0, 0, 0), Vec3(1, 0, 0)}, kBaseFrame, CloudRole::target};
  const PointCloud c{{Vec3(0, 0.5, 0), Vec3(1, 0, 0.25)}, kBaseFrame, CloudRole::non_target};
  EXPECT_DOUBLE_EQ(*min_distance(a, c), 0.25);
  EXPECT_FALSE(min_distance(a, PointCloud{{}, kBaseFrame, CloudRole::non_target}));
}
