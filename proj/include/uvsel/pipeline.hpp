// End-to-end run: detection passes, mask refinement, back-projection into the
// base frame, cleaning point selection, normals, waypoints and ordering.
// Artifacts are written stage by stage so a failed run keeps what it produced.

#ifndef UVSEL_PIPELINE_HPP
#define UVSEL_PIPELINE_HPP

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "uvsel/bundle.hpp"
#include "uvsel/detection.hpp"
#include "uvsel/evaluation.hpp"
#include "uvsel/geometry.hpp"
#include "uvsel/image.hpp"
#include "uvsel/maskops.hpp"
#include "uvsel/planning.hpp"
#include "uvsel/selection.hpp"

namespace uvsel {

/// A failure inside one pipeline stage. `transport` marks detector backend
/// failures (unreachable service, timeout, HTTP error).
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what, bool transport, bool validation)
      : Error("stage '" + stage + "': " + what),
        stage_(std::move(stage)),
        transport_(transport),
        validation_(validation) {}
  const std::string& stage() const { return stage_; }
  bool transport() const { return transport_; }
  bool validation() const { return validation_; }

 private:
  std::string stage_;
  bool transport_;
  bool validation_;
};

class SafetyViolation : public Error {
 public:
  using Error::Error;
};

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct RunArtifacts {
  std::string target_prompt;
  PerceptionMasks masks;
  PointCloud target;      // P_t, base frame, reach filtered
  PointCloud non_target;  // P_nt, base frame, reach filtered
  SelectionResult selection;
  NormalEstimate normals;  // one per P_clean point
  std::vector<Waypoint> waypoints;  // in visit order
  std::optional<TspResult> tsp;
  std::optional<VariantComparison> scores;
  std::optional<double> min_clearance;  // brute-force min distance P_clean to downsampled P_nt
  std::vector<std::string> warnings;
  std::vector<StageTiming> timings;

  bool target_found() const { return masks.target_found; }
};

/// Brute-force minimum distance between two clouds; empty when either is empty.
inline std::optional<double> min_distance(const PointCloud& a, const PointCloud& b) {
  if (a.empty() || b.empty()) return std::nullopt;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : a.points) {
    for (const auto& q : b.points) best = std::min(best, squared_distance(p, q));
  }
  return std::sqrt(best);
}

namespace pipeline_detail {

inline std::string format_xyz(const PointCloud& c) {
  std::string out;
  out.reserve(c.size() * 40);
  char line[96];
  for (const auto& p : c.points) {
    std::snprintf(line, sizeof line, "%.9g %.9g %.9g\n", p.x(), p.y(), p.z());
    out += line;
  }
  return out;
}

inline nlohmann::json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

inline nlohmann::json waypoints_json(const RunArtifacts& r, Ordering ordering) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& w : r.waypoints) {
    nlohmann::json j = {{"position", vec_json(w.position)},
                        {"approach", vec_json(w.approach)},
                        {"surface_point", vec_json(w.surface_point)},
                        {"tangent", vec_json(w.tangent)}};
    if (w.dwell_s) j["dwell_s"] = *w.dwell_s;
    list.push_back(std::move(j));
  }
  nlohmann::json j = {{"frame", kBaseFrame},
                      {"ordering", ordering == Ordering::tsp ? "tsp" : "zigzag"},
                      {"waypoints", std::move(list)}};
  if (r.tsp) {
    j["path_length_m"] = r.tsp->final_length;
    j["seed_length_m"] = r.tsp->seed_length;
    j["length_history_m"] = r.tsp->history;
  }
  return j;
}

/// Writes artifacts into `dir` as they become available.
class Writer {
 public:
  explicit Writer(std::optional<std::filesystem::path> dir) : dir_(std::move(dir)) {
    if (dir_) {
      std::filesystem::create_directories(*dir_ / "masks");
      std::filesystem::create_directories(*dir_ / "clouds");
    }
  }
  void mask(const char* name, const BinaryMask& m) const {
    if (dir_) write_png(*dir_ / "masks" / (std::string(name) + ".png"), m);
  }
  void cloud(const char* name, const PointCloud& c) const {
    if (dir_) write_text_atomic(*dir_ / "clouds" / (std::string(name) + ".xyz"), format_xyz(c));
  }
  void json(const char* name, const nlohmann::json& j) const {
    if (dir_) write_text_atomic(*dir_ / name, j.dump(2) + "\n");
  }
  void text(const char* name, const std::string& s) const {
    if (dir_) write_text_atomic(*dir_ / name, s);
  }

 private:
  std::optional<std::filesystem::path> dir_;
};

}  // namespace pipeline_detail

inline nlohmann::json summary_json(const RunArtifacts& r) {
  auto cloud = [](const PointCloud& c) {
    return nlohmann::json{{"frame", c.frame}, {"role", to_string(c.role)}, {"points", c.size()}};
  };
  nlohmann::json j = {{"target_prompt", r.target_prompt},
                      {"target_found", r.target_found()},
                      {"warnings", r.warnings}};
  if (!r.target_found()) return j;
  j["clouds"] = {{"target", cloud(r.target)},
                 {"non_target", cloud(r.non_target)},
                 {"sor_target", cloud(r.selection.sor_target)},
                 {"downsampled_target", cloud(r.selection.downsampled_target)},
                 {"downsampled_non_target", cloud(r.selection.downsampled_non_target)},
                 {"clean", cloud(r.selection.clean)}};
  j["sor_skipped"] = r.selection.sor_skipped;
  j["empty_at"] = r.selection.empty_at ? nlohmann::json(*r.selection.empty_at) : nullptr;
  j["invalid_normals"] = r.normals.valid.size() - r.normals.valid_count();
  j["waypoints"] = r.waypoints.size();
  j["min_clearance_m"] = r.min_clearance ? nlohmann::json(*r.min_clearance) : nullptr;
  return j;
}

/// Runs the full pipeline on one bundle. When `out_dir` is set every artifact
/// is written there (timings.json last). Returns with target_found() == false
/// when the target pass yields nothing; later stages are then skipped.
/// Throws StageError for stage failures and SafetyViolation when a cleaning
/// point ends up closer than v_t to the downsampled non-target cloud.
inline RunArtifacts run_pipeline(const SceneBundle& bundle, DetectorBackend& backend,
                                 const PipelineConfig& config,
                                 const std::optional<std::filesystem::path>& out_dir = {}) {
  using clock = std::chrono::steady_clock;
  RunArtifacts r;
  pipeline_detail::Writer out(out_dir);

  auto stage = [&](const char* name, auto&& fn) {
    const auto t0 = clock::now();
    try {
      fn();
    } catch (const StageError&) {
      throw;
    } catch (const SafetyViolation&) {
      throw;
    } catch (const BackendError& e) {
      throw StageError(name, e.what(), true, false);
    } catch (const InvalidArgument& e) {
      throw StageError(name, e.what(), false, true);
    } catch (const ConfigError& e) {
      throw StageError(name, e.what(), false, true);
    } catch (const std::exception& e) {
      throw StageError(name, e.what(), false, false);
    }
    r.timings.push_back({name, std::chrono::duration<double>(clock::now() - t0).count()});
  };
  auto write_timings = [&] {
    nlohmann::json t = nlohmann::json::array();
    for (const auto& s : r.timings) t.push_back({{"stage", s.stage}, {"seconds", s.seconds}});
    out.json("timings.json", {{"stages", t}});
  };

  stage("validate", [&] {
    config.validate();
    r.target_prompt = config.target_prompt;
    if (r.target_prompt.empty() && bundle.info) r.target_prompt = bundle.info->target_prompt;
    if (r.target_prompt.empty()) throw ConfigError("no target prompt in config or scene");
    if (!bundle.registered_to_color) throw InvalidArgument("depth is not registered to color");
    if (bundle.camera_to_base.from_frame() != kCameraFrame ||
        bundle.camera_to_base.to_frame() != kBaseFrame) {
      throw InvalidArgument("extrinsics must map camera -> base");
    }
  });

  stage("perception", [&] {
    r.masks = run_perception(backend, bundle.color, r.target_prompt, config.refinement);
    out.mask("raw_target", r.masks.raw_target);
    out.mask("eroded_target", r.masks.eroded_target);
    out.mask("fine_feature", r.masks.fine_feature);
    out.mask("non_target", r.masks.non_target);
    out.mask("final_target", subtract(r.masks.eroded_target, r.masks.non_target));
  });
  if (!r.target_found()) {
    r.warnings.push_back("target not found for prompt '" + r.target_prompt + "'");
    out.json("run.json", summary_json(r));
    write_timings();
    return r;
  }

  stage("point_clouds", [&] {
    auto to_base = [&](const BinaryMask& m, CloudRole role) {
      auto c = transform_points(back_project(bundle.depth, m, bundle.intrinsics),
                                bundle.camera_to_base);
      c = reach_filter(c, config.selection.max_reach);
      c.role = role;
      return c;
    };
    r.target = to_base(r.masks.eroded_target, CloudRole::target);
    r.non_target = to_base(r.masks.non_target, CloudRole::non_target);
    out.cloud("target", r.target);
    out.cloud("non_target", r.non_target);
  });

  stage("selection", [&] {
    r.selection = select_cleaning_points(r.target, r.non_target, config.selection);
    if (r.selection.sor_skipped) r.warnings.push_back("outlier removal skipped: too few points");
    if (r.selection.empty_at) {
      r.warnings.push_back("no cleaning points left after stage '" + *r.selection.empty_at + "'");
    }
    out.cloud("sor_target", r.selection.sor_target);
    out.cloud("downsampled_target", r.selection.downsampled_target);
    out.cloud("downsampled_non_target", r.selection.downsampled_non_target);
    out.cloud("clean", r.selection.clean);
  });

  stage("safety", [&] {
    r.min_clearance = min_distance(r.selection.clean, r.selection.downsampled_non_target);
    if (r.min_clearance && *r.min_clearance < config.selection.v_t) {
      throw SafetyViolation("cleaning point within " + std::to_string(*r.min_clearance) +
                            " m of a non-target point (buffer " +
                            std::to_string(config.selection.v_t) + " m)");
    }
  });

  stage("planning", [&] {
    const auto& clean = r.selection.clean.points;
    const auto& support = r.selection.sor_target.points;
    const int k = std::min<int>(config.planning.normal_k, static_cast<int>(support.size()));
    if (k >= 3) {
      r.normals = estimate_normals(clean, support, k, bundle.camera_to_base.translation());
    } else {
      r.normals.normals.assign(clean.size(), Vec3::Zero());
      r.normals.valid.assign(clean.size(), false);
    }
    std::vector<Vec3> pts, nrm;
    for (std::size_t i = 0; i < clean.size(); ++i) {
      if (!r.normals.valid[i]) continue;
      pts.push_back(clean[i]);
      nrm.push_back(r.normals.normals[i]);
    }
    if (pts.size() != clean.size()) {
      r.warnings.push_back(std::to_string(clean.size() - pts.size()) +
                           " cleaning points dropped: degenerate normal");
    }
    auto wps = make_waypoints(pts, nrm, config.planning.standoff);
    if (config.planning.ordering == Ordering::tsp) {
      r.tsp = order_tsp(wps);
      r.waypoints = apply_order(wps, r.tsp->order);
    } else {
      r.waypoints = apply_order(wps, order_zigzag(wps, config.selection.v_t));
    }
    out.json("waypoints.json", pipeline_detail::waypoints_json(r, config.planning.ordering));
  });

  if (bundle.ground_truth) {
    stage("scoring", [&] {
      r.scores = compare_variants(r.masks.eroded_target, r.masks.non_target,
                                  *bundle.ground_truth, config.score_tolerance_px);
      out.json("scores.json", to_json(*r.scores));
      ScoreTableRow row{"scene"};
      row.add(*r.scores);
      out.text("scores.txt", format_score_table({row}));
    });
  }

  out.json("run.json", summary_json(r));
  write_timings();
  return r;
}

}  // namespace uvsel

#endif  // UVSEL_PIPELINE_HPP
