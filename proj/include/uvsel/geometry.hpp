// Pinhole camera model, frames, back-projection of masked depth and rigid
// transforms.

#ifndef UVSEL_GEOMETRY_HPP
#define UVSEL_GEOMETRY_HPP

#include <Eigen/Geometry>
#include <cmath>
#include <string>
#include <vector>

#include "uvsel/core.hpp"
#include "uvsel/image.hpp"
#include "uvsel/mask.hpp"

namespace uvsel {

inline constexpr const char* kCameraFrame = "camera";
inline constexpr const char* kBaseFrame = "base";

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;
  double depth_scale = 0.001;  // meters per depth unit

  void validate() const {
    if (!(fx > 0.0 && fy > 0.0)) throw InvalidArgument("intrinsics: focal lengths must be > 0");
    if (width <= 0 || height <= 0) throw InvalidArgument("intrinsics: image size must be > 0");
    if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
      throw InvalidArgument("intrinsics: principal point outside image");
    }
    if (!(depth_scale > 0.0)) throw InvalidArgument("intrinsics: depth_scale must be > 0");
  }

  friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;
};

enum class CloudRole { target, non_target, clean };

inline const char* to_string(CloudRole r) {
  switch (r) {
    case CloudRole::target: return "target";
    case CloudRole::non_target: return "non_target";
    case CloudRole::clean: return "clean";
  }
  return "?";
}

struct PointCloud {
  std::vector<Vec3> points;
  std::string frame = kCameraFrame;
  CloudRole role = CloudRole::target;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  friend bool operator==(const PointCloud&, const PointCloud&) = default;
};

/// Maps points expressed in `from_frame` into `to_frame`: p' = R p + t.
class RigidTransform {
 public:
  RigidTransform() = default;
  RigidTransform(const Mat3& rotation, const Vec3& translation, std::string from_frame,
                 std::string to_frame)
      : rotation_(rotation), translation_(translation),
        from_(std::move(from_frame)), to_(std::move(to_frame)) {
    constexpr double tol = 1e-6;
    if (!rotation_.allFinite() || !translation_.allFinite()) {
      throw InvalidArgument("RigidTransform: non-finite entries");
    }
    if (((rotation_.transpose() * rotation_) - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) {
      throw InvalidArgument("RigidTransform: rotation is not orthonormal");
    }
    if (std::abs(rotation_.determinant() - 1.0) > tol) {
      throw InvalidArgument("RigidTransform: rotation determinant is not +1");
    }
  }

  static RigidTransform identity(std::string frame) {
    return {Mat3::Identity(), Vec3::Zero(), frame, frame};
  }

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }
  const std::string& from_frame() const { return from_; }
  const std::string& to_frame() const { return to_; }

  Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }

  RigidTransform inverse() const {
    return {rotation_.transpose(), -(rotation_.transpose() * translation_), to_, from_};
  }

  friend bool operator==(const RigidTransform&, const RigidTransform&) = default;

 private:
  Mat3 rotation_ = Mat3::Identity();
  Vec3 translation_ = Vec3::Zero();
  std::string from_ = kCameraFrame;
  std::string to_ = kCameraFrame;
};

/// One point per set mask pixel with nonzero depth, in the camera frame
/// (x right, y down, z forward). Points are emitted in row-major pixel order.
inline PointCloud back_project(const DepthImage& depth, const BinaryMask& mask,
                               const CameraIntrinsics& intr) {
  if (depth.width() != mask.width() || depth.height() != mask.height()) {
    throw InvalidArgument("back_project: mask and depth dimensions differ");
  }
  PointCloud cloud;
  cloud.frame = kCameraFrame;
  for (int v = 0; v < depth.height(); ++v) {
    for (int u = 0; u < depth.width(); ++u) {
      if (!mask.at(u, v)) continue;
      const auto raw = depth.at(u, v);
      if (raw == 0) continue;
      const double z = raw * intr.depth_scale;
      cloud.points.emplace_back((u - intr.cx) * z / intr.fx, (v - intr.cy) * z / intr.fy, z);
    }
  }
  return cloud;
}

inline PointCloud transform_points(const PointCloud& cloud, const RigidTransform& tf) {
  if (cloud.frame != tf.from_frame()) {
    throw InvalidArgument("transform_points: cloud frame '" + cloud.frame +
                          "' does not match transform source frame '" + tf.from_frame() +
                          "'");
  }
  PointCloud out;
  out.frame = tf.to_frame();
  out.role = cloud.role;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back(tf.apply(p));
  return out;
}

/// Keeps points with Euclidean norm <= max_reach (the base sits at the origin).
inline PointCloud reach_filter(const PointCloud& cloud, double max_reach) {
  if (!(max_reach > 0.0)) throw InvalidArgument("reach_filter: max_reach must be > 0");
  if (cloud.frame != kBaseFrame) {
    throw InvalidArgument("reach_filter: cloud must be in the base frame, got '" +
                          cloud.frame + "'");
  }
  PointCloud out;
  out.frame = cloud.frame;
  out.role = cloud.role;
  for (const auto& p : cloud.points) {
    if (p.norm() <= max_reach) out.points.push_back(p);
  }
  return out;
}

}  // namespace uvsel

#endif  // UVSEL_GEOMETRY_HPP
