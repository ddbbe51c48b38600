// Scene bundles (one RGB-D observation plus fixture detections and optional
// ground truth) and the pipeline configuration file.
//
// Bundle directory layout:
//   rgb.png                8-bit RGB
//   depth.png              16-bit depth units (mm by default)
//   intrinsics.json        fx, fy, cx, cy, width, height, depth_scale_m, registered_to_color
//   extrinsics.json        camera -> base rigid transform
//   detections.json        fixture detections keyed by prompt, masks under masks/
//   scene.json             optional: archetype, target_prompt, planted_fine_feature_error
//   ground_truth/          optional: gt_target.png, gt_visible_target.png,
//                          objects/<name>.png, regions.json

#ifndef UVSEL_BUNDLE_HPP
#define UVSEL_BUNDLE_HPP

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "uvsel/evaluation.hpp"
#include "uvsel/fixture_backend.hpp"
#include "uvsel/geometry.hpp"
#include "uvsel/image.hpp"
#include "uvsel/maskops.hpp"
#include "uvsel/planning.hpp"
#include "uvsel/selection.hpp"

namespace uvsel {

namespace fs = std::filesystem;

struct SceneInfo {
  std::string archetype;
  std::string target_prompt;
  bool planted_fine_feature_error = false;

  friend bool operator==(const SceneInfo&, const SceneInfo&) = default;
};

struct SceneBundle {
  RgbImage color;
  DepthImage depth;
  CameraIntrinsics intrinsics;
  bool registered_to_color = true;
  RigidTransform camera_to_base{Mat3::Identity(), Vec3::Zero(), kCameraFrame, kBaseFrame};
  DetectionTable detections;
  std::optional<SceneInfo> info;
  std::optional<GroundTruth> ground_truth;

  friend bool operator==(const SceneBundle&, const SceneBundle&) = default;
};

/// Raised by load_bundle when validation reports problems.
class BundleError : public IoError {
 public:
  BundleError(const fs::path& dir, std::vector<std::string> findings)
      : IoError(describe(dir, findings)), findings_(std::move(findings)) {}
  const std::vector<std::string>& findings() const { return findings_; }

 private:
  static std::string describe(const fs::path& dir, const std::vector<std::string>& f) {
    std::string s = "invalid scene bundle " + dir.string() + ":";
    for (const auto& x : f) s += "\n  - " + x;
    return s;
  }
  std::vector<std::string> findings_;
};

namespace bundle_detail {

inline nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open " + p.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(p.string() + ": " + e.what());
  }
}

inline void write_json(const fs::path& p, const nlohmann::json& j) {
  write_text_atomic(p, j.dump(2) + "\n");
}

inline nlohmann::json intrinsics_json(const CameraIntrinsics& k, bool registered) {
  return {{"fx", k.fx},
          {"fy", k.fy},
          {"cx", k.cx},
          {"cy", k.cy},
          {"width", k.width},
          {"height", k.height},
          {"depth_scale_m", k.depth_scale},
          {"registered_to_color", registered}};
}

inline nlohmann::json transform_json(const RigidTransform& t) {
  nlohmann::json rot = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) {
    rot.push_back({t.rotation()(r, 0), t.rotation()(r, 1), t.rotation()(r, 2)});
  }
  return {{"from_frame", t.from_frame()},
          {"to_frame", t.to_frame()},
          {"rotation", rot},
          {"translation_m", {t.translation().x(), t.translation().y(), t.translation().z()}}};
}

inline RigidTransform transform_from_json(const nlohmann::json& j) {
  Mat3 r;
  for (int i = 0; i < 3; ++i) {
    for (int c = 0; c < 3; ++c) r(i, c) = j.at("rotation").at(i).at(c).get<double>();
  }
  const auto& t = j.at("translation_m");
  return {r, Vec3(t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>()),
          j.at("from_frame").get<std::string>(), j.at("to_frame").get<std::string>()};
}

}  // namespace bundle_detail

/// Structural checks on a bundle directory. Returns human-readable findings;
/// an empty list means the bundle is usable.
inline std::vector<std::string> validate_bundle(const fs::path& dir) {
  std::vector<std::string> f;
  if (!fs::is_directory(dir)) return {"bundle directory " + dir.string() + " absent"};
  for (const char* name :
       {"rgb.png", "depth.png", "intrinsics.json", "extrinsics.json", "detections.json"}) {
    if (!fs::exists(dir / name)) f.push_back(std::string(name) + " absent");
  }
  if (!f.empty()) return f;

  int w = -1, h = -1;
  try {
    auto k = bundle_detail::read_json(dir / "intrinsics.json");
    CameraIntrinsics intr{k.at("fx").get<double>(),   k.at("fy").get<double>(),
                          k.at("cx").get<double>(),   k.at("cy").get<double>(),
                          k.at("width").get<int>(),   k.at("height").get<int>(),
                          k.at("depth_scale_m").get<double>()};
    intr.validate();
    w = intr.width;
    h = intr.height;
    if (!k.value("registered_to_color", false)) {
      f.push_back("intrinsics.json: depth is not registered to the color stream");
    }
  } catch (const std::exception& e) {
    f.push_back(std::string("intrinsics.json: ") + e.what());
  }
  try {
    auto t = bundle_detail::transform_from_json(bundle_detail::read_json(dir / "extrinsics.json"));
    if (t.from_frame() != kCameraFrame || t.to_frame() != kBaseFrame) {
      f.push_back("extrinsics.json: expected camera -> base transform");
    }
  } catch (const std::exception& e) {
    f.push_back(std::string("extrinsics.json: ") + e.what());
  }
  auto check_size = [&](const std::string& name, int iw, int ih) {
    if (w >= 0 && (iw != w || ih != h)) {
      f.push_back(name + ": size " + std::to_string(iw) + "x" + std::to_string(ih) +
                  " differs from intrinsics " + std::to_string(w) + "x" + std::to_string(h));
    }
  };
  try {
    auto rgb = read_rgb(dir / "rgb.png");
    check_size("rgb.png", rgb.width(), rgb.height());
  } catch (const std::exception& e) {
    f.push_back(std::string("rgb.png: ") + e.what());
  }
  try {
    auto d = read_depth(dir / "depth.png");
    check_size("depth.png", d.width(), d.height());
  } catch (const std::exception& e) {
    f.push_back(std::string("depth.png: ") + e.what());
  }
  try {
    auto table = load_detection_table(dir);
    for (const auto& [prompt, list] : table) {
      for (const auto& d : list) {
        check_size("detection mask for '" + prompt + "'", d.mask.width(), d.mask.height());
        if (w > 0) {
          try {
            validate_detection(d, w, h);
          } catch (const std::exception& e) {
            f.push_back(e.what());
          }
        }
      }
    }
  } catch (const std::exception& e) {
    f.push_back(std::string("detections: ") + e.what());
  }
  const auto gt = dir / "ground_truth";
  if (fs::exists(gt)) {
    for (const char* name : {"gt_target.png", "gt_visible_target.png", "regions.json"}) {
      if (!fs::exists(gt / name)) f.push_back(std::string("ground_truth/") + name + " absent");
    }
  }
  return f;
}

inline SceneBundle load_bundle(const fs::path& dir) {
  if (auto findings = validate_bundle(dir); !findings.empty()) {
    throw BundleError(dir, std::move(findings));
  }
  SceneBundle b;
  b.color = read_rgb(dir / "rgb.png");
  b.depth = read_depth(dir / "depth.png");
  auto k = bundle_detail::read_json(dir / "intrinsics.json");
  b.intrinsics = {k.at("fx").get<double>(), k.at("fy").get<double>(),
                  k.at("cx").get<double>(), k.at("cy").get<double>(),
                  k.at("width").get<int>(), k.at("height").get<int>(),
                  k.at("depth_scale_m").get<double>()};
  b.registered_to_color = k.at("registered_to_color").get<bool>();
  b.camera_to_base = bundle_detail::transform_from_json(bundle_detail::read_json(dir / "extrinsics.json"));
  b.detections = load_detection_table(dir);

  if (fs::exists(dir / "scene.json")) {
    auto s = bundle_detail::read_json(dir / "scene.json");
    b.info = SceneInfo{s.value("archetype", ""), s.value("target_prompt", ""),
                       s.value("planted_fine_feature_error", false)};
  }

  const auto gtdir = dir / "ground_truth";
  if (fs::exists(gtdir)) {
    GroundTruth gt;
    gt.target = read_mask(gtdir / "gt_target.png");
    gt.visible_target = read_mask(gtdir / "gt_visible_target.png");
    auto regions = bundle_detail::read_json(gtdir / "regions.json");
    for (const auto& r : regions.at("regions")) {
      gt.target_regions.push_back({r.at("name").get<std::string>(),
                                   read_mask(gtdir / r.at("mask_file").get<std::string>()),
                                   r.at("weight").get<double>()});
    }
    if (fs::exists(gtdir / "objects")) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(gtdir / "objects")) {
        if (e.path().extension() == ".png") files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& p : files) gt.objects.push_back({p.stem().string(), read_mask(p)});
    }
    gt.validate();
    b.ground_truth = std::move(gt);
  }
  return b;
}

/// Writes every part of the bundle. Objects are written in name order so that
/// load(save(b)) == b requires b's objects to be sorted by name.
inline void save_bundle(const SceneBundle& b, const fs::path& dir) {
  fs::create_directories(dir);
  write_png(dir / "rgb.png", b.color);
  write_png(dir / "depth.png", b.depth);
  bundle_detail::write_json(dir / "intrinsics.json",
                            bundle_detail::intrinsics_json(b.intrinsics, b.registered_to_color));
  bundle_detail::write_json(dir / "extrinsics.json", bundle_detail::transform_json(b.camera_to_base));
  save_detection_table(dir, b.detections);
  if (b.info) {
    bundle_detail::write_json(dir / "scene.json",
                              {{"archetype", b.info->archetype},
                               {"target_prompt", b.info->target_prompt},
                               {"planted_fine_feature_error", b.info->planted_fine_feature_error}});
  }
  if (b.ground_truth) {
    const auto& gt = *b.ground_truth;
    const auto gtdir = dir / "ground_truth";
    fs::create_directories(gtdir / "objects");
    fs::create_directories(gtdir / "regions");
    write_png(gtdir / "gt_target.png", gt.target);
    write_png(gtdir / "gt_visible_target.png", gt.visible_target);
    nlohmann::json regions = nlohmann::json::array();
    for (const auto& r : gt.target_regions) {
      const std::string rel = "regions/" + r.name + ".png";
      write_png(gtdir / rel, r.mask);
      regions.push_back({{"name", r.name}, {"weight", r.weight}, {"mask_file", rel}});
    }
    bundle_detail::write_json(gtdir / "regions.json", {{"regions", regions}});
    for (const auto& o : gt.objects) write_png(gtdir / "objects" / (o.name + ".png"), o.mask);
  }
}

// ---------------------------------------------------------------------------
// Pipeline configuration

enum class BackendKind { fixture, remote };

struct PipelineConfig {
  std::string target_prompt;  // may be empty; a bundle's scene.json can supply it
  RefinementConfig refinement;
  SelectionConfig selection;
  PlanningConfig planning;
  BackendKind backend = BackendKind::fixture;
  std::string endpoint;
  std::size_t score_tolerance_px = 0;

  void validate() const {
    refinement.validate();
    selection.validate();
    planning.validate();
    if (backend == BackendKind::remote && endpoint.empty()) {
      throw ConfigError("config: remote backend needs an endpoint");
    }
  }

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

namespace config_detail {

inline void reject_unknown(const nlohmann::json& obj, std::initializer_list<const char*> known,
                           const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void take(const nlohmann::json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

}  // namespace config_detail

inline nlohmann::json to_json(const PipelineConfig& c) {
  return {
      {"target_prompt", c.target_prompt},
      {"backend", c.backend == BackendKind::remote ? "remote" : "fixture"},
      {"endpoint", c.endpoint},
      {"refinement",
       {{"target_erosion_kernel_px", c.refinement.target_erosion_kernel},
        {"inverted_erosion_kernel_px", c.refinement.inverted_erosion_kernel},
        {"fine_feature_area_max_px", c.refinement.fine_feature_area_max},
        {"fine_feature_prompt", c.refinement.fine_feature_prompt},
        {"target_confidence", c.refinement.target_confidence},
        {"fine_confidence", c.refinement.fine_confidence}}},
      {"selection",
       {{"v_t_m", c.selection.v_t},
        {"v_nt_m", c.selection.v_nt},
        {"max_reach_m", c.selection.max_reach},
        {"sor_neighbors", c.selection.sor_neighbors},
        {"sor_std_ratio", c.selection.sor_std_ratio},
        {"voxel_anchor", c.selection.voxel_anchor == VoxelAnchor::member_centroid
                             ? "member_centroid"
                             : "cell_center"}}},
      {"planning",
       {{"standoff_m", c.planning.standoff},
        {"normal_k", c.planning.normal_k},
        {"ordering", c.planning.ordering == Ordering::zigzag ? "zigzag" : "tsp"}}},
      {"evaluation", {{"tolerance_px", c.score_tolerance_px}}}};
}

/// Parses a config document. Omitted keys keep their defaults; unknown keys
/// and invalid values are errors.
inline PipelineConfig config_from_json(const nlohmann::json& j) {
  using config_detail::reject_unknown;
  using config_detail::take;
  PipelineConfig c;
  if (j.is_null()) return c;
  reject_unknown(j, {"target_prompt", "backend", "endpoint", "refinement", "selection",
                     "planning", "evaluation"},
                 "config");
  take(j, "target_prompt", c.target_prompt, "config");
  std::string backend = "fixture";
  take(j, "backend", backend, "config");
  if (backend == "remote") c.backend = BackendKind::remote;
  else if (backend != "fixture") throw ConfigError("config.backend: expected fixture|remote");
  take(j, "endpoint", c.endpoint, "config");

  if (j.contains("refinement")) {
    const auto& r = j.at("refinement");
    const std::string w = "config.refinement";
    reject_unknown(r, {"target_erosion_kernel_px", "inverted_erosion_kernel_px",
                       "fine_feature_area_max_px", "fine_feature_prompt", "target_confidence",
                       "fine_confidence"},
                   w);
    take(r, "target_erosion_kernel_px", c.refinement.target_erosion_kernel, w);
    take(r, "inverted_erosion_kernel_px", c.refinement.inverted_erosion_kernel, w);
    if (r.contains("fine_feature_area_max_px")) {
      long long v = 0;
      take(r, "fine_feature_area_max_px", v, w);
      if (v < 0) throw ConfigError(w + ".fine_feature_area_max_px: must be >= 0");
      c.refinement.fine_feature_area_max = static_cast<std::size_t>(v);
    }
    take(r, "fine_feature_prompt", c.refinement.fine_feature_prompt, w);
    take(r, "target_confidence", c.refinement.target_confidence, w);
    take(r, "fine_confidence", c.refinement.fine_confidence, w);
  }
  if (j.contains("selection")) {
    const auto& s = j.at("selection");
    const std::string w = "config.selection";
    reject_unknown(s, {"v_t_m", "v_nt_m", "max_reach_m", "sor_neighbors", "sor_std_ratio",
                       "voxel_anchor"},
                   w);
    take(s, "v_t_m", c.selection.v_t, w);
    take(s, "v_nt_m", c.selection.v_nt, w);
    take(s, "max_reach_m", c.selection.max_reach, w);
    take(s, "sor_neighbors", c.selection.sor_neighbors, w);
    take(s, "sor_std_ratio", c.selection.sor_std_ratio, w);
    std::string anchor = "cell_center";
    take(s, "voxel_anchor", anchor, w);
    if (anchor == "member_centroid") c.selection.voxel_anchor = VoxelAnchor::member_centroid;
    else if (anchor != "cell_center") throw ConfigError(w + ".voxel_anchor: expected cell_center|member_centroid");
  }
  if (j.contains("planning")) {
    const auto& p = j.at("planning");
    const std::string w = "config.planning";
    reject_unknown(p, {"standoff_m", "normal_k", "ordering"}, w);
    take(p, "standoff_m", c.planning.standoff, w);
    take(p, "normal_k", c.planning.normal_k, w);
    std::string ordering = "tsp";
    take(p, "ordering", ordering, w);
    if (ordering == "zigzag") c.planning.ordering = Ordering::zigzag;
    else if (ordering != "tsp") throw ConfigError(w + ".ordering: expected zigzag|tsp");
  }
  if (j.contains("evaluation")) {
    const auto& e = j.at("evaluation");
    reject_unknown(e, {"tolerance_px"}, "config.evaluation");
    long long tol = 0;
    take(e, "tolerance_px", tol, "config.evaluation");
    if (tol < 0) throw ConfigError("config.evaluation.tolerance_px: must be >= 0");
    c.score_tolerance_px = static_cast<std::size_t>(tol);
  }
  c.validate();
  return c;
}

/// An empty (or whitespace-only) file yields the default configuration.
inline PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return {};
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

inline void save_config(const PipelineConfig& c, const fs::path& path) {
  write_text_atomic(path, to_json(c).dump(2) + "\n");
}

}  // namespace uvsel

#endif  // UVSEL_BUNDLE_HPP
