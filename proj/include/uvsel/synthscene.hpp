// Deterministic synthetic scene bundles: analytic primitives ray-cast into a
// 16-bit depth image, flat-shaded color, exact ground-truth masks, and fixture
// detections with controllable corruption.
//
// World frame == manipulator base frame, z up. Target surfaces are boxes
// grouped into weighted regions; non-target objects are cuboids, upright
// cylinders or horizontal tubes resting on a target surface.

#ifndef UVSEL_SYNTHSCENE_HPP
#define UVSEL_SYNTHSCENE_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "uvsel/bundle.hpp"
#include "uvsel/detection.hpp"
#include "uvsel/evaluation.hpp"
#include "uvsel/geometry.hpp"
#include "uvsel/image.hpp"

namespace uvsel::synth {

enum class Shape { cuboid, cylinder, tube };

inline const char* to_string(Shape s) {
  switch (s) {
    case Shape::cuboid: return "cuboid";
    case Shape::cylinder: return "cylinder";
    case Shape::tube: return "tube";
  }
  return "?";
}

/// Box with yaw about world z.
struct Box {
  Vec3 center;
  Vec3 half;  // half extents along local x, y, z
  double yaw = 0.0;
};

struct TargetPart {
  std::string region;
  Box box;
};

struct RegionSpec {
  std::string name;
  double weight = 1.0;
};

/// dims: cuboid (length, width, height); cylinder (radius, height, -);
/// tube (radius, length, -). `base` is the (x, y) center of the footprint and
/// `rest_z` the height of the surface the object lies on.
struct ObjectSpec {
  std::string name;
  Shape shape = Shape::cuboid;
  Vec3 dims = Vec3::Zero();
  double base_x = 0.0;
  double base_y = 0.0;
  double rest_z = 0.0;
  double yaw = 0.0;
};

struct Corruption {
  int boundary_dilate_px = 0;        // target-pass masks grown by this many pixels
  bool fine_feature_dropout = false;  // tubes left inside the target-pass mask
  int noise_px = 0;                   // salt and pepper pixels in each target-pass mask
};

struct SceneSpec {
  std::string archetype = "tabletop";
  std::string target_prompt = "white table";
  std::vector<RegionSpec> regions;
  std::vector<TargetPart> parts;
  double floor_z = -0.65;
  std::vector<ObjectSpec> objects;
  CameraIntrinsics intrinsics{320.0, 320.0, 320.0, 240.0, 640, 480, 0.001};
  RigidTransform camera_pose{Mat3::Identity(), Vec3::Zero(), kCameraFrame, kBaseFrame};
  Corruption corruption;
};

class SpecError : public InvalidArgument {
 public:
  explicit SpecError(std::vector<std::string> violations)
      : InvalidArgument(describe(violations)), violations_(std::move(violations)) {}
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  static std::string describe(const std::vector<std::string>& v) {
    std::string s = "invalid scene spec:";
    for (const auto& x : v) s += "\n  - " + x;
    return s;
  }
  std::vector<std::string> violations_;
};

// ---------------------------------------------------------------------------
// Ray casting

namespace detail {

inline Mat3 yaw_matrix(double yaw) {
  return Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
}

struct Ray {
  Vec3 origin;
  Vec3 dir;
};

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  Vec3 normal = Vec3::UnitZ();
};

constexpr double kEps = 1e-9;

inline std::optional<Hit> intersect_box(const Ray& ray, const Box& box) {
  const Mat3 r = yaw_matrix(box.yaw);
  const Vec3 o = r.transpose() * (ray.origin - box.center);
  const Vec3 d = r.transpose() * ray.dir;
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  int axis0 = -1;
  double sign0 = 1.0;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d(a)) < 1e-15) {
      if (std::abs(o(a)) > box.half(a)) return std::nullopt;
      continue;
    }
    double ta = (-box.half(a) - o(a)) / d(a);
    double tb = (box.half(a) - o(a)) / d(a);
    double s = -1.0;  // normal sign of the entry face
    if (ta > tb) {
      std::swap(ta, tb);
      s = 1.0;
    }
    if (ta > t0) {
      t0 = ta;
      axis0 = a;
      sign0 = s;
    }
    t1 = std::min(t1, tb);
  }
  if (t0 > t1 || t0 <= kEps || axis0 < 0) return std::nullopt;
  Vec3 n = Vec3::Zero();
  n(axis0) = sign0;
  return Hit{t0, r * n};
}

struct Cylinder {
  Vec3 center;
  Vec3 axis;  // unit
  double radius;
  double half_length;
};

inline std::optional<Hit> intersect_cylinder(const Ray& ray, const Cylinder& c) {
  Hit best;
  const Vec3 oc = ray.origin - c.center;
  const double da = ray.dir.dot(c.axis);
  const double oa = oc.dot(c.axis);
  const Vec3 dp = ray.dir - da * c.axis;
  const Vec3 op = oc - oa * c.axis;
  const double a = dp.squaredNorm();
  const double b = 2.0 * dp.dot(op);
  const double cc = op.squaredNorm() - c.radius * c.radius;
  if (a > 1e-15) {
    const double disc = b * b - 4.0 * a * cc;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      for (double t : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)}) {
        if (t <= kEps || t >= best.t) continue;
        const double axial = oa + t * da;
        if (std::abs(axial) > c.half_length) continue;
        const Vec3 p = oc + t * ray.dir;
        best = {t, (p - (p.dot(c.axis)) * c.axis).normalized()};
      }
    }
  }
  if (std::abs(da) > 1e-15) {
    for (double side : {-1.0, 1.0}) {
      const double t = (side * c.half_length - oa) / da;
      if (t <= kEps || t >= best.t) continue;
      const Vec3 p = oc + t * ray.dir;
      if ((p - p.dot(c.axis) * c.axis).squaredNorm() <= c.radius * c.radius) {
        best = {t, side * c.axis};
      }
    }
  }
  if (!std::isfinite(best.t)) return std::nullopt;
  return best;
}

inline Cylinder object_cylinder(const ObjectSpec& o) {
  if (o.shape == Shape::cylinder) {
    return {Vec3(o.base_x, o.base_y, o.rest_z + o.dims(1) / 2.0), Vec3::UnitZ(), o.dims(0),
            o.dims(1) / 2.0};
  }
  return {Vec3(o.base_x, o.base_y, o.rest_z + o.dims(0)),
          yaw_matrix(o.yaw) * Vec3::UnitX(), o.dims(0), o.dims(1) / 2.0};
}

inline Box object_box(const ObjectSpec& o) {
  return {Vec3(o.base_x, o.base_y, o.rest_z + o.dims(2) / 2.0), o.dims / 2.0, o.yaw};
}

inline std::optional<Hit> intersect_object(const Ray& ray, const ObjectSpec& o) {
  if (o.shape == Shape::cuboid) return intersect_box(ray, object_box(o));
  return intersect_cylinder(ray, object_cylinder(o));
}

/// Reference point of an object for projection checks.
inline Vec3 object_center(const ObjectSpec& o) {
  if (o.shape == Shape::cuboid) return object_box(o).center;
  return object_cylinder(o).center;
}

inline std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Uniform double in [0, 1) from a 64-bit engine, independent of the
/// standard library's distribution implementations.
inline double uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace detail

/// Camera-to-base pose for a camera at `eye` looking at `target`; `up` picks
/// the world direction that appears toward the top of the image.
inline RigidTransform look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 z = (target - eye).normalized();
  const Vec3 x = z.cross(up).normalized();
  const Vec3 y = z.cross(x);
  Mat3 r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return {r, eye, kCameraFrame, kBaseFrame};
}

// ---------------------------------------------------------------------------
// Validation and rendering

inline std::vector<std::string> validate_spec(const SceneSpec& s) {
  std::vector<std::string> v;
  try {
    s.intrinsics.validate();
  } catch (const std::exception& e) {
    v.push_back(e.what());
  }
  if (s.camera_pose.from_frame() != kCameraFrame || s.camera_pose.to_frame() != kBaseFrame) {
    v.push_back("camera pose must map camera -> base");
  }
  if (s.target_prompt.empty()) v.push_back("target prompt is empty");
  if (s.regions.empty()) v.push_back("no target regions");
  if (s.parts.empty()) v.push_back("no target parts");
  double wsum = 0.0;
  std::set<std::string> region_names;
  for (const auto& r : s.regions) {
    wsum += r.weight;
    if (!region_names.insert(r.name).second) v.push_back("duplicate region '" + r.name + "'");
    if (!(r.weight > 0.0)) v.push_back("region '" + r.name + "' has non-positive weight");
  }
  if (!s.regions.empty() && std::abs(wsum - 1.0) > 1e-9) v.push_back("region weights do not sum to 1");
  for (const auto& p : s.parts) {
    if (!region_names.count(p.region)) v.push_back("part references unknown region '" + p.region + "'");
    if (!(p.box.half.minCoeff() > 0.0)) v.push_back("part of '" + p.region + "' has empty extent");
  }
  const auto cam_from_base = s.camera_pose.inverse();
  auto project = [&](const Vec3& world) -> std::optional<std::array<double, 3>> {
    const Vec3 c = cam_from_base.apply(world);
    if (c.z() <= 0.0) return std::nullopt;
    return std::array<double, 3>{s.intrinsics.fx * c.x() / c.z() + s.intrinsics.cx,
                                 s.intrinsics.fy * c.y() / c.z() + s.intrinsics.cy, c.z()};
  };
  if (!s.parts.empty()) {
    auto px = project(s.parts.front().box.center);
    if (!px || (*px)[0] < 0 || (*px)[1] < 0 || (*px)[0] >= s.intrinsics.width ||
        (*px)[1] >= s.intrinsics.height) {
      v.push_back("camera does not see the target surface");
    }
  }
  std::set<std::string> names;
  for (const auto& o : s.objects) {
    if (o.name.empty()) v.push_back("object with empty name");
    if (!names.insert(o.name).second) v.push_back("duplicate object name '" + o.name + "'");
    const int used = o.shape == Shape::cuboid ? 3 : 2;
    for (int i = 0; i < used; ++i) {
      if (!(o.dims(i) > 0.0)) v.push_back("object '" + o.name + "' has non-positive dimensions");
    }
    if (o.shape == Shape::tube) {
      auto px = project(detail::object_center(o));
      if (px) {
        const double radius_px = o.dims(0) * s.intrinsics.fx / (*px)[2];
        if (radius_px < 1.0) {
          v.push_back("tube '" + o.name + "' radius renders below 1 pixel (" +
                      std::to_string(radius_px) + ")");
        }
      }
    }
  }
  if (s.corruption.boundary_dilate_px < 0 || s.corruption.noise_px < 0) {
    v.push_back("corruption amounts must be >= 0");
  }
  return v;
}

/// Per-pixel labels from ray casting. -1 no hit, 0 floor, 1.. target part
/// index + 1, and 1000 + object index for objects.
struct RenderedScene {
  DepthImage depth;
  RgbImage color;
  std::vector<int> label_all;
  std::vector<int> label_no_objects;
};

inline constexpr int kFloorLabel = 0;
inline constexpr int kObjectLabelBase = 1000;

inline RenderedScene ray_cast(const SceneSpec& s) {
  const auto& k = s.intrinsics;
  RenderedScene out{DepthImage(k.width, k.height), RgbImage(k.width, k.height),
                    std::vector<int>(static_cast<std::size_t>(k.width) * k.height, -1),
                    std::vector<int>(static_cast<std::size_t>(k.width) * k.height, -1)};
  const Mat3& rot = s.camera_pose.rotation();
  const Vec3& eye = s.camera_pose.translation();
  const Vec3 light = Vec3(0.3, 0.2, 1.0).normalized();

  std::vector<std::array<std::uint8_t, 3>> object_colors;
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    if (s.objects[i].shape == Shape::tube) {
      object_colors.push_back({40, 170, 70});
    } else {
      const auto h = detail::mix(static_cast<std::uint64_t>(i), 7);
      object_colors.push_back({static_cast<std::uint8_t>(60 + h % 160),
                               static_cast<std::uint8_t>(40 + (h >> 8) % 160),
                               static_cast<std::uint8_t>(40 + (h >> 16) % 160)});
    }
  }

  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const Vec3 d_cam((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
      const detail::Ray ray{eye, rot * d_cam};
      // t along rot * d_cam equals camera-frame depth because d_cam.z == 1.
      detail::Hit best;
      int label = -1;
      if (ray.dir.z() < -1e-15) {
        const double t = (s.floor_z - eye.z()) / ray.dir.z();
        if (t > detail::kEps) {
          best = {t, Vec3::UnitZ()};
          label = kFloorLabel;
        }
      }
      for (std::size_t p = 0; p < s.parts.size(); ++p) {
        if (auto h = detail::intersect_box(ray, s.parts[p].box); h && h->t < best.t) {
          best = *h;
          label = static_cast<int>(p) + 1;
        }
      }
      const std::size_t idx = static_cast<std::size_t>(v) * k.width + u;
      out.label_no_objects[idx] = label;
      for (std::size_t o = 0; o < s.objects.size(); ++o) {
        if (auto h = detail::intersect_object(ray, s.objects[o]); h && h->t < best.t) {
          best = *h;
          label = kObjectLabelBase + static_cast<int>(o);
        }
      }
      out.label_all[idx] = label;
      if (label < 0) continue;

      const double mm = std::round(best.t / k.depth_scale);
      out.depth.set(u, v, mm >= 1.0 && mm <= 65535.0 ? static_cast<std::uint16_t>(mm) : 0);

      std::array<std::uint8_t, 3> base{110, 110, 110};
      if (label >= kObjectLabelBase) {
        base = object_colors[static_cast<std::size_t>(label - kObjectLabelBase)];
      } else if (label > 0) {
        base = s.archetype == "chair" ? std::array<std::uint8_t, 3>{70, 70, 80}
                                      : std::array<std::uint8_t, 3>{228, 228, 222};
      }
      const double shade = 0.45 + 0.55 * std::abs(best.normal.dot(light));
      auto* px = out.color.pixel(u, v);
      for (int c = 0; c < 3; ++c) {
        px[c] = static_cast<std::uint8_t>(std::lround(std::min(255.0, base[c] * shade)));
      }
    }
  }
  return out;
}

namespace detail {

inline BinaryMask mask_where(const std::vector<int>& labels, int w, int h,
                             const std::function<bool(int)>& pred) {
  BinaryMask m(w, h);
  auto bits = m.bits();
  for (std::size_t i = 0; i < labels.size(); ++i) bits[i] = pred(labels[i]) ? 1 : 0;
  return m;
}

inline void add_noise(BinaryMask& m, int count, std::mt19937_64& rng) {
  const auto n = m.size();
  auto bits = m.bits();
  for (int i = 0; i < count; ++i) {
    bits[static_cast<std::size_t>(uniform(rng) * static_cast<double>(n))] = 1;  // salt
    bits[static_cast<std::size_t>(uniform(rng) * static_cast<double>(n))] = 0;  // pepper
  }
}

inline BinaryMask square_patch(int w, int h, int x0, int y0, int size) {
  BinaryMask m(w, h);
  for (int y = std::max(0, y0); y < std::min(h, y0 + size); ++y) {
    for (int x = std::max(0, x0); x < std::min(w, x0 + size); ++x) m.set(x, y);
  }
  return m;
}

}  // namespace detail

inline const char* kFinePrompt = "string. accessories";

/// Renders a spec into a complete scene bundle with ground truth.
///
/// Target-pass fixture: one detection per region (its visible pixels), plus a
/// below-threshold floor patch. With fine_feature_dropout the tubes stay inside
/// the first region's mask, the segmenter failure the fine-feature pass repairs.
/// Fine-feature-pass fixture: every visible object ("string" for tubes,
/// "accessories" otherwise), a low-score false positive over the whole target,
/// and a patch below the 0.2 threshold.
inline SceneBundle render(const SceneSpec& spec, std::uint64_t seed) {
  if (auto v = validate_spec(spec); !v.empty()) throw SpecError(std::move(v));
  std::mt19937_64 rng(detail::mix(seed, 0x5eed));
  const int w = spec.intrinsics.width;
  const int h = spec.intrinsics.height;
  auto rs = ray_cast(spec);

  SceneBundle b;
  b.color = std::move(rs.color);
  b.depth = std::move(rs.depth);
  b.intrinsics = spec.intrinsics;
  b.camera_to_base = spec.camera_pose;
  b.info = SceneInfo{spec.archetype, spec.target_prompt,
                     spec.corruption.fine_feature_dropout &&
                         std::any_of(spec.objects.begin(), spec.objects.end(),
                                     [](const ObjectSpec& o) { return o.shape == Shape::tube; })};

  GroundTruth gt;
  auto is_target = [](int l) { return l > 0 && l < kObjectLabelBase; };
  gt.target = detail::mask_where(rs.label_no_objects, w, h, is_target);
  for (const auto& r : spec.regions) {
    auto in_region = [&](int l) {
      return is_target(l) && spec.parts[static_cast<std::size_t>(l - 1)].region == r.name;
    };
    gt.target_regions.push_back({r.name, detail::mask_where(rs.label_no_objects, w, h, in_region), r.weight});
  }
  for (std::size_t o = 0; o < spec.objects.size(); ++o) {
    const int want = kObjectLabelBase + static_cast<int>(o);
    gt.objects.push_back({spec.objects[o].name,
                          detail::mask_where(rs.label_all, w, h, [want](int l) { return l == want; })});
  }
  gt.visible_target = detail::mask_where(rs.label_all, w, h, is_target);

  // Target-pass detections.
  auto& target_list = b.detections[spec.target_prompt];
  BinaryMask planted(w, h);
  if (spec.corruption.fine_feature_dropout) {
    for (std::size_t o = 0; o < spec.objects.size(); ++o) {
      if (spec.objects[o].shape == Shape::tube) planted = unite(planted, gt.objects[o].mask);
    }
  }
  for (std::size_t r = 0; r < gt.target_regions.size(); ++r) {
    BinaryMask m = intersect(gt.target_regions[r].mask, gt.visible_target);
    if (r == 0) m = unite(m, planted);
    m = dilate(m, spec.corruption.boundary_dilate_px);
    detail::add_noise(m, spec.corruption.noise_px, rng);
    if (area(m) == 0) continue;
    target_list.push_back({spec.target_prompt, 0.6 + 0.3 * detail::uniform(rng), mask_bbox(m), m});
  }
  {
    const BinaryMask floor = detail::mask_where(rs.label_all, w, h, [](int l) { return l == kFloorLabel; });
    auto patch = intersect(detail::square_patch(w, h, 4, 4, 48), floor);
    if (area(patch) > 0) {
      target_list.push_back({spec.target_prompt, 0.3, mask_bbox(patch), patch});
    }
  }

  // Fine-feature-pass detections.
  auto& fine_list = b.detections[kFinePrompt];
  for (std::size_t o = 0; o < spec.objects.size(); ++o) {
    const auto& m = gt.objects[o].mask;
    if (area(m) == 0) continue;
    const bool tube = spec.objects[o].shape == Shape::tube;
    fine_list.push_back({tube ? "string" : "accessories",
                         tube ? 0.3 + 0.3 * detail::uniform(rng) : 0.25 + 0.4 * detail::uniform(rng),
                         mask_bbox(m), m});
  }
  if (area(gt.visible_target) > 0) {
    fine_list.push_back({"accessories", 0.21, mask_bbox(gt.visible_target), gt.visible_target});
  }
  {
    auto patch = detail::square_patch(w, h, w - 40, h - 40, 30);
    fine_list.push_back({"accessories", 0.1, mask_bbox(patch), patch});
  }

  std::sort(gt.objects.begin(), gt.objects.end(),
            [](const NamedMask& a, const NamedMask& c) { return a.name < c.name; });
  b.ground_truth = std::move(gt);
  return b;
}

// ---------------------------------------------------------------------------
// Archetypes and the standard suite

namespace detail {

struct Footprint {
  double x, y, hx, hy, yaw;
};

inline Footprint footprint(const ObjectSpec& o) {
  switch (o.shape) {
    case Shape::cuboid: return {o.base_x, o.base_y, o.dims(0) / 2, o.dims(1) / 2, o.yaw};
    case Shape::cylinder: return {o.base_x, o.base_y, o.dims(0), o.dims(0), 0.0};
    case Shape::tube: return {o.base_x, o.base_y, o.dims(1) / 2, o.dims(0), o.yaw};
  }
  return {};
}

/// Separating-axis overlap test on two yawed rectangles grown by `margin`.
inline bool footprints_overlap(const Footprint& a, const Footprint& b, double margin) {
  auto axes = [](const Footprint& f) {
    return std::array<Eigen::Vector2d, 2>{Eigen::Vector2d(std::cos(f.yaw), std::sin(f.yaw)),
                                          Eigen::Vector2d(-std::sin(f.yaw), std::cos(f.yaw))};
  };
  const auto aa = axes(a);
  const auto ba = axes(b);
  const Eigen::Vector2d d(b.x - a.x, b.y - a.y);
  auto radius = [&](const Footprint& f, const std::array<Eigen::Vector2d, 2>& ax,
                    const Eigen::Vector2d& n) {
    return (f.hx + margin) * std::abs(ax[0].dot(n)) + (f.hy + margin) * std::abs(ax[1].dot(n));
  };
  for (const auto& n : {aa[0], aa[1], ba[0], ba[1]}) {
    if (std::abs(d.dot(n)) > radius(a, aa, n) + radius(b, ba, n)) return false;
  }
  return true;
}

struct Template {
  const char* kind;
  Shape shape;
  Vec3 dims;
};

}  // namespace detail

/// Target geometry, camera and prompt for an archetype, without objects.
///   tabletop: 1.0 x 0.6 m table, camera 0.6 m above looking down
///   railing:  1.0 m bed rail, camera 0.5 m above
///   chair:    geriatric chair seat + two armrests, regions weighted 0.5 / 0.5
inline SceneSpec archetype_spec(const std::string& archetype) {
  SceneSpec s;
  s.archetype = archetype;
  const Vec3 up = Vec3::UnitY();
  if (archetype == "tabletop") {
    s.target_prompt = "white table";
    s.regions = {{"table", 1.0}};
    const Vec3 c(0.715, 0.015, 0.1 - 0.0125);
    s.parts = {{"table", {c, Vec3(0.5, 0.3, 0.0125), 0.0}}};
    const Vec3 top(c.x(), c.y(), 0.1);
    s.camera_pose = look_at(top + Vec3(0, 0, 0.6), top, up);
  } else if (archetype == "railing") {
    s.target_prompt = "railing";
    s.regions = {{"rail", 1.0}};
    const Vec3 c(0.7, 0.0, 0.1 - 0.02);
    s.parts = {{"rail", {c, Vec3(0.5, 0.04, 0.02), 0.0}}};
    const Vec3 top(c.x(), c.y(), 0.1);
    s.camera_pose = look_at(top + Vec3(0, 0, 0.5), top, up);
  } else if (archetype == "chair") {
    s.target_prompt = "geriatric chair";
    s.regions = {{"seat", 0.5}, {"armrests", 0.5}};
    s.parts = {{"seat", {Vec3(0.6, 0.0, -0.04), Vec3(0.25, 0.25, 0.04), 0.0}},
               {"armrests", {Vec3(0.6, 0.3, 0.195), Vec3(0.25, 0.035, 0.025), 0.0}},
               {"armrests", {Vec3(0.6, -0.3, 0.195), Vec3(0.25, 0.035, 0.025), 0.0}}};
    const Vec3 top(0.6, 0.0, 0.0);
    s.camera_pose = look_at(top + Vec3(0, 0, 0.75), top, up);
  } else {
    throw SpecError({"unknown archetype '" + archetype + "'"});
  }
  return s;
}

/// Adds `count` non-overlapping objects drawn from the archetype's inventory.
/// When `first_is_tube` the first object is a thin tube.
inline void place_objects(SceneSpec& s, int count, bool first_is_tube, std::uint64_t seed) {
  std::mt19937_64 rng(detail::mix(seed, 0x0b1ec7));
  std::vector<detail::Template> inventory;
  detail::Template tube{"tube", Shape::tube, Vec3(0.004, 0.4, 0)};
  double x0, x1, y0, y1, rest_z;
  if (s.archetype == "tabletop") {
    tube.dims = Vec3(0.0038, 0.4, 0);
    inventory = {tube,
                 {"phone", Shape::cuboid, Vec3(0.15, 0.075, 0.008)},
                 {"thin_book", Shape::cuboid, Vec3(0.22, 0.15, 0.02)},
                 {"bottle", Shape::cylinder, Vec3(0.035, 0.2, 0)},
                 {"thermometer", Shape::cuboid, Vec3(0.15, 0.04, 0.03)},
                 {"thick_book", Shape::cuboid, Vec3(0.3, 0.22, 0.05)}};
    x0 = 0.315; x1 = 1.115; y0 = -0.185; y1 = 0.215; rest_z = 0.1;
  } else if (s.archetype == "railing") {
    tube.dims = Vec3(0.004, 0.35, 0);
    inventory = {tube,
                 {"drainage_tube", Shape::tube, Vec3(0.005, 0.3, 0)},
                 {"holder", Shape::cuboid, Vec3(0.1, 0.08, 0.15)}};
    x0 = 0.3; x1 = 1.1; y0 = 0.0; y1 = 0.0; rest_z = 0.1;
  } else {
    tube.dims = Vec3(0.0055, 0.3, 0);
    inventory = {tube,
                 {"phone", Shape::cuboid, Vec3(0.15, 0.075, 0.008)},
                 {"bottle", Shape::cylinder, Vec3(0.035, 0.2, 0)},
                 {"thin_book", Shape::cuboid, Vec3(0.22, 0.15, 0.02)},
                 {"jacket", Shape::cuboid, Vec3(0.3, 0.25, 0.05)}};
    x0 = 0.4; x1 = 0.8; y0 = -0.18; y1 = 0.18; rest_z = 0.0;
  }

  std::vector<detail::Footprint> placed;
  for (const auto& o : s.objects) placed.push_back(detail::footprint(o));
  // A template that does not fit is replaced by another draw.
  for (int added = 0, tries = 0; added < count && tries < 8 * count; ++tries) {
    const auto& tpl = (added == 0 && first_is_tube)
                          ? inventory.front()
                          : inventory[static_cast<std::size_t>(detail::uniform(rng) * inventory.size())];
    bool ok = false;
    ObjectSpec o;
    for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
      o = {std::string("obj") + std::to_string(s.objects.size()) + "_" + tpl.kind, tpl.shape,
           tpl.dims, x0 + (x1 - x0) * detail::uniform(rng), y0 + (y1 - y0) * detail::uniform(rng),
           rest_z, std::numbers::pi * detail::uniform(rng)};
      if (s.archetype == "railing" && tpl.shape == Shape::tube) {
        // Tubes drape across the rail.
        o.yaw = std::numbers::pi / 2 + (detail::uniform(rng) - 0.5) * 0.8;
      } else if (s.archetype == "railing") {
        o.yaw = 0.0;
      }
      const auto fp = detail::footprint(o);
      ok = std::none_of(placed.begin(), placed.end(), [&](const detail::Footprint& p) {
        return detail::footprints_overlap(p, fp, 0.03);
      });
    }
    if (!ok) continue;
    placed.push_back(detail::footprint(o));
    s.objects.push_back(o);
    ++added;
  }
}

struct SuiteEntry {
  std::string name;
  SceneSpec spec;
  std::uint64_t seed;
};

/// Archetypes x object counts {0..3} x {clean, planted}. Planted scenes start
/// with a tube left inside the target-pass mask, mild boundary bleed and
/// salt-and-pepper noise.
inline std::vector<SuiteEntry> standard_suite_specs(std::uint64_t seed) {
  std::vector<SuiteEntry> out;
  for (const char* arch : {"tabletop", "railing", "chair"}) {
    for (int count = 0; count <= 3; ++count) {
      for (bool planted : {false, true}) {
        const std::uint64_t s = detail::mix(seed, out.size());
        SceneSpec spec = archetype_spec(arch);
        place_objects(spec, count, planted, s);
        if (planted) spec.corruption = {1, true, 40};
        out.push_back({std::string(arch) + "_n" + std::to_string(count) +
                           (planted ? "_planted" : "_clean"),
                       std::move(spec), s});
      }
    }
  }
  return out;
}

inline std::vector<std::pair<std::string, SceneBundle>> standard_suite(std::uint64_t seed) {
  std::vector<std::pair<std::string, SceneBundle>> out;
  for (auto& e : standard_suite_specs(seed)) out.emplace_back(e.name, render(e.spec, e.seed));
  return out;
}

// ---------------------------------------------------------------------------
// Spec files for `gen`

inline Shape shape_from_string(const std::string& s) {
  if (s == "cuboid") return Shape::cuboid;
  if (s == "cylinder") return Shape::cylinder;
  if (s == "tube") return Shape::tube;
  throw SpecError({"unknown shape '" + s + "'"});
}

/// {"archetype": "tabletop|railing|chair", "object_count": n, "first_object_tube": bool,
///  "objects": [{"name", "shape", "dims_m": [..], "base_m": [x, y], "yaw_rad"}],
///  "corruption": {"boundary_dilate_px", "fine_feature_dropout", "noise_px"},
///  "target_prompt": "..."}
/// Explicit objects rest on the archetype's main surface; random ones fill up
/// to object_count.
inline SceneSpec spec_from_json(const nlohmann::json& j, std::uint64_t seed) {
  try {
    SceneSpec s = archetype_spec(j.value("archetype", "tabletop"));
    if (j.contains("target_prompt")) s.target_prompt = j.at("target_prompt").get<std::string>();
    const double rest_z = s.archetype == "chair" ? 0.0 : 0.1;
    if (j.contains("objects")) {
      for (const auto& e : j.at("objects")) {
        ObjectSpec o;
        o.name = e.at("name").get<std::string>();
        o.shape = shape_from_string(e.at("shape").get<std::string>());
        const auto dims = e.at("dims_m").get<std::vector<double>>();
        for (std::size_t i = 0; i < dims.size() && i < 3; ++i) o.dims(static_cast<int>(i)) = dims[i];
        o.base_x = e.at("base_m").at(0).get<double>();
        o.base_y = e.at("base_m").at(1).get<double>();
        o.rest_z = e.value("rest_z_m", rest_z);
        o.yaw = e.value("yaw_rad", 0.0);
        s.objects.push_back(o);
      }
    }
    const int extra = j.value("object_count", static_cast<int>(s.objects.size())) -
                      static_cast<int>(s.objects.size());
    if (extra > 0) place_objects(s, extra, j.value("first_object_tube", false), seed);
    if (j.contains("corruption")) {
      const auto& c = j.at("corruption");
      s.corruption.boundary_dilate_px = c.value("boundary_dilate_px", 0);
      s.corruption.fine_feature_dropout = c.value("fine_feature_dropout", false);
      s.corruption.noise_px = c.value("noise_px", 0);
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw SpecError({e.what()});
  }
}

}  // namespace uvsel::synth

#endif  // UVSEL_SYNTHSCENE_HPP
