// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 on any FAIL.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "test_util.hpp"
#include "uvsel/bundle.hpp"
#include "uvsel/fixture_backend.hpp"
#include "uvsel/pipeline.hpp"
#include "uvsel/synthscene.hpp"

using namespace uvsel;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

struct SuiteRun {
  std::string name;
  SceneBundle bundle;
  RunArtifacts run;
};

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<SuiteRun> run_suite() {
  std::vector<SuiteRun> out;
  for (auto& [name, bundle] : synth::standard_suite(7)) {
    FixtureBackend backend(bundle.detections);
    auto r = run_pipeline(bundle, backend, PipelineConfig{});
    out.push_back({name, std::move(bundle), std::move(r)});
  }
  return out;
}

std::vector<Vec3> random_cloud(std::mt19937& rng, std::size_t n, double extent) {
  std::uniform_real_distribution<double> u(0.0, extent);
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = Vec3(u(rng), u(rng), u(rng));
  return pts;
}

bool members(const std::vector<Vec3>& sub, const std::vector<Vec3>& super) {
  std::set<std::tuple<double, double, double>> s;
  for (const auto& p : super) s.emplace(p.x(), p.y(), p.z());
  for (const auto& p : sub) {
    if (!s.count({p.x(), p.y(), p.z()})) return false;
  }
  return true;
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

Outcome buffer_safety(const std::vector<SuiteRun>& suite) {
  const auto t0 = clock_type::now();
  const double vt = SelectionConfig{}.v_t;
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& s : suite) {
    const auto& sel = s.run.selection;
    if (sel.clean.empty() || sel.downsampled_non_target.empty()) continue;
    worst = std::min(worst, oracle::min_distance(sel.clean.points, sel.downsampled_non_target.points));
  }
  std::mt19937 rng(101);
  int agree = 0;
  for (int i = 0; i < 100; ++i) {
    const auto t = random_cloud(rng, 300, 1.0);
    const auto nt = random_cloud(rng, 600, 1.0);
    const PointCloud tc{t, kBaseFrame, CloudRole::target};
    const PointCloud ntc{nt, kBaseFrame, CloudRole::non_target};
    const auto kept = buffer_exclude(tc, ntc, vt);
    std::vector<Vec3> expected;
    for (auto j : oracle::buffer_keep(t, nt, vt)) expected.push_back(t[j]);
    if (kept.points == expected) ++agree;
  }
  const double elapsed = seconds_since(t0);
  return {worst >= vt && agree == 100 && elapsed < 10.0,
          fmt("min clearance %.4f m (buffer %.3f), grid vs oracle %d/100, %.2f s", worst, vt, agree,
              elapsed)};
}

Outcome subset_chain(const std::vector<SuiteRun>& suite) {
  int ok = 0, checked = 0;
  for (const auto& s : suite) {
    if (!s.run.target_found()) continue;
    ++checked;
    const auto& sel = s.run.selection;
    if (members(sel.sor_target.points, s.run.target.points) &&
        members(sel.downsampled_target.points, sel.sor_target.points) &&
        members(sel.clean.points, sel.downsampled_target.points)) {
      ++ok;
    }
  }
  return {checked == static_cast<int>(suite.size()) && ok == checked,
          fmt("%d/%d scenes with clean ⊆ downsampled ⊆ filtered ⊆ target", ok, checked)};
}

Outcome voxel_oracle() {
  std::mt19937 rng(102);
  int agree = 0;
  for (int i = 0; i < 100; ++i) {
    const auto pts = random_cloud(rng, 1000, 0.5);
    const auto got = voxel_downsample_nearest(PointCloud{pts, kBaseFrame, CloudRole::target}, 0.07,
                                              VoxelAnchor::cell_center);
    std::vector<Vec3> expected;
    for (auto j : oracle::voxel_keep(pts, 0.07)) expected.push_back(pts[j]);
    if (got.points == expected) ++agree;
  }
  return {agree == 100, fmt("%d/100 clouds match the reference", agree)};
}

Outcome erosion_oracle() {
  std::mt19937 rng(103);
  int agree = 0, total = 0;
  for (int i = 0; i < 100; ++i) {
    const auto m = testutil::blobby_mask(rng, 96, 72);
    for (int k : {3, 10, 20}) {
      ++total;
      if (erode(m, k) == testutil::from_grid(oracle::erode(testutil::to_grid(m), k))) ++agree;
    }
  }
  const auto full = BinaryMask::full(64, 48);
  const bool fixed = erode(full, 10) == full && erode(full, 20) == full;
  return {agree == total && fixed,
          fmt("%d/%d masks match, full mask fixed point %s", agree, total, fixed ? "holds" : "broken")};
}

Outcome fine_feature_recovery(const std::vector<SuiteRun>& suite) {
  const int w = 160, h = 120;
  BinaryMask tube(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (std::abs((y - x - 10) / std::sqrt(2.0)) <= 1.5) tube.set(x, y);
    }
  }
  const auto raw = invert(tube);
  const bool lost = intersection_area(erode(invert(raw), 20), tube) == 0;
  const auto nt = build_non_target_mask(raw, tube);
  const double recovered =
      static_cast<double>(intersection_area(nt, tube)) / static_cast<double>(area(tube));

  int caught = 0, planted = 0;
  for (const auto& s : suite) {
    if (!s.bundle.info || !s.bundle.info->planted_fine_feature_error || !s.run.scores) continue;
    for (const auto& o : s.run.scores->with_ntm.objects) {
      if (o.name.find("tube") == std::string::npos) continue;
      ++planted;
      caught += o.score;
    }
  }
  return {lost && recovered >= 0.95 && planted > 0 && caught == planted,
          fmt("3 px tube: %s by inverse erosion, %.1f%% recovered; planted tubes caught %d/%d",
              lost ? "lost" : "kept", 100.0 * recovered, caught, planted)};
}

Outcome ntm_improves(const std::vector<SuiteRun>& suite) {
  ScoreTableRow planted{"planted"}, all{"all"};
  bool same_t = true;
  for (const auto& s : suite) {
    if (!s.run.scores) continue;
    const auto& c = *s.run.scores;
    same_t = same_t && c.with_ntm.target == c.without_ntm.target;
    all.add(c);
    if (s.bundle.info && s.bundle.info->planted_fine_feature_error) planted.add(c);
  }
  const double pw = planted.nt_with_pct().value_or(0), pwo = planted.nt_without_pct().value_or(0);
  const double aw = all.nt_with_pct().value_or(0), awo = all.nt_without_pct().value_or(0);
  return {same_t && pw > pwo && aw >= awo,
          fmt("NT planted %.1f%% -> %.1f%%, all %.1f%% -> %.1f%%, T %.1f%% both variants", pwo, pw,
              awo, aw, all.t_pct())};
}

Outcome scoring_metric() {
  using testutil::rect_mask;
  GroundTruth one;
  one.target = BinaryMask::full(100, 10);
  one.visible_target = one.target;
  one.target_regions = {{"surface", one.target, 1.0}};
  const bool half = score_target(rect_mask(100, 10, 0, 0, 50, 10), one).value == 1.0;
  const bool under = score_target(rect_mask(100, 10, 0, 0, 49, 10), one).value == 0.0;
  GroundTruth two = one;
  two.target_regions = {{"a", rect_mask(100, 10, 0, 0, 50, 10), 0.5},
                        {"b", rect_mask(100, 10, 50, 0, 50, 10), 0.5}};
  const bool weighted = score_target(rect_mask(100, 10, 0, 0, 50, 10), two).value == 0.5;
  GroundTruth obj = one;
  obj.objects = {{"cup", rect_mask(100, 10, 10, 0, 5, 5)}};
  BinaryMask touch(100, 10);
  touch.set(12, 2);
  const bool nt = score_non_target(touch, obj)[0].score == 0 &&
                  score_non_target(BinaryMask(100, 10), obj)[0].score == 1;
  return {half && under && weighted && nt,
          fmt("50%%: %s, 49%%: %s, two regions: %s, NT overlap: %s", half ? "1" : "wrong",
              under ? "0" : "wrong", weighted ? "0.5" : "wrong", nt ? "ok" : "wrong")};
}

Outcome normals_accuracy() {
  std::mt19937 rng(104);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::normal_distribution<double> noise(0.0, 0.001);
  std::vector<Vec3> pts;
  for (int i = 0; i < 5000; ++i) pts.emplace_back(u(rng), u(rng), 0.1 + noise(rng));
  const Vec3 view(0.2, -0.1, 0.8);
  const auto est = estimate_normals(PointCloud{pts, kBaseFrame, CloudRole::target}, 30, view);
  std::size_t within = 0, facing = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!est.valid[i]) continue;
    if (est.normals[i].dot(view - pts[i]) >= 0.0) ++facing;
    if (std::acos(std::clamp(est.normals[i].z(), -1.0, 1.0)) <= 5.0 * std::numbers::pi / 180.0) ++within;
  }
  const double frac = static_cast<double>(within) / static_cast<double>(pts.size());
  return {frac >= 0.99 && facing == pts.size(),
          fmt("%.2f%% within 5 deg, %zu/%zu facing the viewpoint", 100.0 * frac, facing, pts.size())};
}

Outcome tsp_quality() {
  std::mt19937 rng(105);
  std::uniform_real_distribution<double> u(0.2, 1.0);
  std::uniform_int_distribution<int> count(3, 8);
  int good = 0;
  bool monotone = true;
  for (int i = 0; i < 100; ++i) {
    std::vector<Vec3> pts(static_cast<std::size_t>(count(rng)));
    for (auto& p : pts) p = Vec3(u(rng), u(rng), 0.1 * u(rng));
    const auto wps = make_waypoints(pts, std::vector<Vec3>(pts.size(), Vec3::UnitZ()), 0.0);
    const auto r = order_tsp(wps);
    for (std::size_t j = 1; j < r.history.size(); ++j) monotone = monotone && r.history[j] <= r.history[j - 1];
    if (r.final_length <= 1.05 * oracle::tsp_optimum(pts, r.order.front()) + 1e-12) ++good;
  }
  return {good >= 95 && monotone,
          fmt("%d/100 within 5%% of optimal, lengths %s", good, monotone ? "non-increasing" : "increase")};
}

Outcome determinism(const std::vector<SuiteRun>& suite) {
  const auto& s = suite[7];  // tabletop_n3_planted
  testutil::TempDir a("acc"), b("acc");
  FixtureBackend b1(s.bundle.detections), b2(s.bundle.detections);
  run_pipeline(s.bundle, b1, PipelineConfig{}, a.path());
  run_pipeline(s.bundle, b2, PipelineConfig{}, b.path());
  auto ta = read_tree(a.path()), tb = read_tree(b.path());
  ta.erase("timings.json");
  tb.erase("timings.json");
  return {!ta.empty() && ta == tb,
          fmt("%s: %zu artifacts %s", s.name.c_str(), ta.size(), ta == tb ? "identical" : "differ")};
}

Outcome io_roundtrip(const std::vector<SuiteRun>& suite) {
  std::mt19937 rng(106);
  int ok = 0;
  for (int i = 0; i < 100; ++i) {
    const auto m = testutil::random_mask(rng, 64 + i, 48, 0.3);
    if (rle_decode(rle_encode(m), m.width(), m.height()) == m) ++ok;
  }
  testutil::TempDir dir("acc");
  int same = 0;
  for (const auto& s : suite) {
    save_bundle(s.bundle, dir.path() / s.name);
    if (load_bundle(dir.path() / s.name) == s.bundle) ++same;
  }
  return {ok == 100 && same == static_cast<int>(suite.size()),
          fmt("RLE %d/100, bundles %d/%zu identical after save/load", ok, same, suite.size())};
}

}  // namespace

int main() {
  const auto t0 = clock_type::now();
  const auto suite = run_suite();
  std::cout << "standard suite: " << suite.size() << " scenes in " << fmt("%.1f", seconds_since(t0))
            << " s\n";

  const std::vector<std::pair<const char*, std::function<Outcome()>>> checks = {
      {"buffer_safety", [&] { return buffer_safety(suite); }},
      {"subset_chain", [&] { return subset_chain(suite); }},
      {"voxel_nearest_to_center", voxel_oracle},
      {"erosion_exact", erosion_oracle},
      {"fine_feature_recovery", [&] { return fine_feature_recovery(suite); }},
      {"non_target_mask_improves_nt", [&] { return ntm_improves(suite); }},
      {"scoring_metric", scoring_metric},
      {"normal_accuracy", normals_accuracy},
      {"tsp_quality", tsp_quality},
      {"determinism", [&] { return determinism(suite); }},
      {"rle_and_bundle_roundtrip", [&] { return io_roundtrip(suite); }},
  };
  int failed = 0;
  for (const auto& [name, fn] : checks) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << "\n";
  }
  std::cout << (failed ? std::to_string(failed) + " failed" : std::string("all passed")) << "\n";
  return failed ? 1 : 0;
}
