// Cleaning point selection: outlier removal and voxel downsampling of the
// target cloud, downsampling of the non-target cloud, then removal of every
// target point closer than v_t to a non-target point.

#ifndef UVSEL_SELECTION_HPP
#define UVSEL_SELECTION_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "uvsel/geometry.hpp"
#include "uvsel/neighbors.hpp"

namespace uvsel {

/// Which point a voxel keeps: the member nearest the cell's geometric center,
/// or the member nearest the mean of the voxel's members.
enum class VoxelAnchor { cell_center, member_centroid };

struct SelectionConfig {
  double v_t = 0.070;   // target voxel size and buffer distance, meters
  double v_nt = 0.010;  // non-target voxel size, meters
  double max_reach = 1.3;
  int sor_neighbors = 20;
  double sor_std_ratio = 2.0;
  VoxelAnchor voxel_anchor = VoxelAnchor::cell_center;

  void validate() const {
    if (!(v_t > 0.0)) throw ConfigError("selection: v_t must be > 0");
    if (!(v_nt > 0.0)) throw ConfigError("selection: v_nt must be > 0");
    if (!(max_reach > 0.0)) throw ConfigError("selection: max_reach must be > 0");
    if (sor_neighbors < 1) throw ConfigError("selection: sor_neighbors must be >= 1");
    if (!(sor_std_ratio > 0.0)) throw ConfigError("selection: sor_std_ratio must be > 0");
  }

  friend bool operator==(const SelectionConfig&, const SelectionConfig&) = default;
};

struct OutlierResult {
  PointCloud cloud;
  bool skipped = false;  // cloud had <= k points and was returned unchanged
};

/// Mean distance from each point to its k nearest neighbors (self excluded).
/// Distances are summed in ascending order.
inline std::vector<double> mean_neighbor_distances(std::span<const Vec3> points,
                                                   std::size_t k) {
  KnnIndex index(points);
  std::vector<double> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto nn = index.neighbors_of(i, k);
    double sum = 0.0;
    for (auto j : nn) sum += std::sqrt(squared_distance(points[i], points[j]));
    out[i] = sum / static_cast<double>(nn.size());
  }
  return out;
}

/// Removes points whose mean k-NN distance exceeds mu + std_ratio * sigma,
/// where mu / sigma (sample standard deviation) are taken over the cloud.
inline OutlierResult statistical_outlier_removal(const PointCloud& cloud, int k,
                                                 double std_ratio) {
  if (cloud.empty()) throw InvalidArgument("statistical_outlier_removal: empty cloud");
  if (k < 1) throw InvalidArgument("statistical_outlier_removal: k must be >= 1");
  if (cloud.size() <= static_cast<std::size_t>(k)) return {cloud, true};

  const auto mean_d = mean_neighbor_distances(cloud.points, static_cast<std::size_t>(k));
  double sum = 0.0, sq = 0.0;
  for (double d : mean_d) {
    sum += d;
    sq += d * d;
  }
  const double n = static_cast<double>(mean_d.size());
  const double mean = sum / n;
  const double var = std::max(0.0, (sq - sum * sum / n) / (n - 1.0));
  const double threshold = mean + std_ratio * std::sqrt(var);

  OutlierResult out;
  out.cloud.frame = cloud.frame;
  out.cloud.role = cloud.role;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (mean_d[i] <= threshold) out.cloud.points.push_back(cloud.points[i]);
  }
  return out;
}

struct VoxelIndex {
  std::int64_t x, y, z;
  auto operator<=>(const VoxelIndex&) const = default;
};

inline VoxelIndex voxel_of(const Vec3& p, double v) {
  return {static_cast<std::int64_t>(std::floor(p.x() / v)),
          static_cast<std::int64_t>(std::floor(p.y() / v)),
          static_cast<std::int64_t>(std::floor(p.z() / v))};
}

inline Vec3 voxel_center(const VoxelIndex& c, double v) {
  return {(static_cast<double>(c.x) + 0.5) * v, (static_cast<double>(c.y) + 0.5) * v,
          (static_cast<double>(c.z) + 0.5) * v};
}

/// One input point per occupied voxel: the point nearest the voxel anchor,
/// ties to the lowest input index. Output keeps input order, so it is an
/// ordered subsequence of the input.
inline PointCloud voxel_downsample_nearest(const PointCloud& cloud, double v,
                                           VoxelAnchor anchor = VoxelAnchor::cell_center) {
  if (!(v > 0.0)) throw InvalidArgument("voxel_downsample_nearest: voxel size must be > 0");
  std::map<VoxelIndex, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    buckets[voxel_of(cloud.points[i], v)].push_back(i);
  }
  std::vector<std::size_t> keep;
  keep.reserve(buckets.size());
  for (const auto& [cell, members] : buckets) {
    Vec3 target = voxel_center(cell, v);
    if (anchor == VoxelAnchor::member_centroid) {
      target = Vec3::Zero();
      for (auto i : members) target += cloud.points[i];
      target /= static_cast<double>(members.size());
    }
    std::size_t best = members.front();
    double best_d = squared_distance(cloud.points[best], target);
    for (auto i : members) {
      const double d = squared_distance(cloud.points[i], target);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    keep.push_back(best);
  }
  std::sort(keep.begin(), keep.end());
  PointCloud out;
  out.frame = cloud.frame;
  out.role = cloud.role;
  out.points.reserve(keep.size());
  for (auto i : keep) out.points.push_back(cloud.points[i]);
  return out;
}

/// Drops target points with distance < buffer to any non-target point.
/// Points exactly `buffer` away survive.
inline PointCloud buffer_exclude(const PointCloud& target, const PointCloud& non_target,
                                 double buffer) {
  if (!(buffer > 0.0)) throw InvalidArgument("buffer_exclude: buffer must be > 0");
  if (target.frame != non_target.frame) {
    throw InvalidArgument("buffer_exclude: clouds are in different frames");
  }
  PointCloud out;
  out.frame = target.frame;
  out.role = target.role;
  if (non_target.empty()) {
    out.points = target.points;
    return out;
  }
  GridHash grid(non_target.points, buffer);
  for (const auto& p : target.points) {
    if (!grid.any_within(p, buffer)) out.points.push_back(p);
  }
  return out;
}

struct SelectionResult {
  PointCloud sor_target;
  PointCloud downsampled_target;
  PointCloud downsampled_non_target;
  PointCloud clean;
  bool sor_skipped = false;
  /// Set when the target cloud became empty; names the stage where it happened.
  std::optional<std::string> empty_at;
};

/// Outlier removal on P_t, voxel downsampling of both clouds, buffer exclusion.
/// Inputs must already be in the base frame and reach-filtered.
inline SelectionResult select_cleaning_points(const PointCloud& target,
                                              const PointCloud& non_target,
                                              const SelectionConfig& cfg) {
  cfg.validate();
  if (target.frame != kBaseFrame || non_target.frame != kBaseFrame) {
    throw InvalidArgument("select_cleaning_points: clouds must be in the base frame");
  }
  SelectionResult r;
  r.downsampled_non_target = voxel_downsample_nearest(non_target, cfg.v_nt, cfg.voxel_anchor);
  r.downsampled_non_target.role = CloudRole::non_target;

  auto finish_empty = [&](const char* stage) {
    r.clean = PointCloud{{}, kBaseFrame, CloudRole::clean};
    r.empty_at = stage;
    return r;
  };
  r.sor_target.frame = r.downsampled_target.frame = kBaseFrame;
  if (target.empty()) return finish_empty("input");

  auto sor = statistical_outlier_removal(target, cfg.sor_neighbors, cfg.sor_std_ratio);
  r.sor_target = std::move(sor.cloud);
  r.sor_skipped = sor.skipped;
  if (r.sor_target.empty()) return finish_empty("outlier_removal");

  r.downsampled_target = voxel_downsample_nearest(r.sor_target, cfg.v_t, cfg.voxel_anchor);

  r.clean = buffer_exclude(r.downsampled_target, r.downsampled_non_target, cfg.v_t);
  r.clean.role = CloudRole::clean;
  if (r.clean.empty()) r.empty_at = "buffer_exclusion";
  return r;
}

}  // namespace uvsel

#endif  // UVSEL_SELECTION_HPP
