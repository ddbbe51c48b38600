// Standoff waypoints from surface normals, and visit ordering (zigzag sweep or
// open-path TSP heuristic).

#ifndef UVSEL_PLANNING_HPP
#define UVSEL_PLANNING_HPP

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "uvsel/geometry.hpp"
#include "uvsel/neighbors.hpp"

namespace uvsel {

enum class Ordering { zigzag, tsp };

struct PlanningConfig {
  double standoff = 0.0381;  // meters; midpoint of 1-2 inches
  int normal_k = 30;
  Ordering ordering = Ordering::tsp;

  void validate() const {
    if (!(standoff > 0.0)) throw ConfigError("planning: standoff must be > 0");
    if (normal_k < 3) throw ConfigError("planning: normal_k must be >= 3");
  }

  friend bool operator==(const PlanningConfig&, const PlanningConfig&) = default;
};

struct Waypoint {
  Vec3 position;       // emitter location
  Vec3 approach;       // unit tool axis, pointing at the surface
  Vec3 surface_point;  // the cleaning point being targeted
  Vec3 tangent;        // unit x-axis completing the orientation
  std::optional<double> dwell_s;
};

struct NormalEstimate {
  std::vector<Vec3> normals;
  std::vector<bool> valid;  // false where the neighborhood has rank < 2

  std::size_t valid_count() const {
    return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), true));
  }
};

/// Unit normal of a neighborhood: eigenvector of the smallest covariance
/// eigenvalue. Empty when the neighborhood spans fewer than two dimensions.
inline std::optional<Vec3> fit_normal(std::span<const Vec3> pts) {
  Vec3 mean = Vec3::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& p : pts) {
    const Vec3 d = p - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(pts.size());
  Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
  const auto& ev = es.eigenvalues();  // ascending
  if (!(ev(2) > 0.0) || ev(1) <= 1e-10 * ev(2)) return std::nullopt;
  return es.eigenvectors().col(0).normalized();
}

/// Normals at `queries` fitted to the k nearest points of `support` (the
/// query itself counts when it belongs to support). Each normal is flipped so
/// that normal . (viewpoint - query) >= 0.
inline NormalEstimate estimate_normals(std::span<const Vec3> queries,
                                       std::span<const Vec3> support, int k,
                                       const Vec3& viewpoint) {
  if (k < 3) throw InvalidArgument("estimate_normals: k must be >= 3");
  if (support.size() < static_cast<std::size_t>(k)) {
    throw InvalidArgument("estimate_normals: cloud has fewer than k points");
  }
  KnnIndex index(support);
  NormalEstimate out;
  out.normals.resize(queries.size(), Vec3::Zero());
  out.valid.resize(queries.size(), false);
  std::vector<Vec3> hood;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    hood.clear();
    for (auto j : index.nearest(queries[i], static_cast<std::size_t>(k))) {
      hood.push_back(support[j]);
    }
    auto n = fit_normal(hood);
    if (!n) continue;
    if (n->dot(viewpoint - queries[i]) < 0.0) *n = -*n;
    out.normals[i] = *n;
    out.valid[i] = true;
  }
  return out;
}

inline NormalEstimate estimate_normals(const PointCloud& cloud, int k, const Vec3& viewpoint) {
  return estimate_normals(cloud.points, cloud.points, k, viewpoint);
}

/// Tangent axis for a tool pointing along -normal: world x projected onto the
/// tangent plane, or world y when x is (nearly) parallel to the normal.
inline Vec3 tangent_axis(const Vec3& normal) {
  Vec3 t = Vec3::UnitX() - Vec3::UnitX().dot(normal) * normal;
  if (t.norm() < 1e-6) t = Vec3::UnitY() - Vec3::UnitY().dot(normal) * normal;
  return t.normalized();
}

inline std::vector<Waypoint> make_waypoints(std::span<const Vec3> points,
                                            std::span<const Vec3> normals, double standoff) {
  if (points.size() != normals.size()) {
    throw InvalidArgument("make_waypoints: points and normals differ in length");
  }
  if (standoff < 0.0) throw InvalidArgument("make_waypoints: negative standoff");
  std::vector<Waypoint> out;
  out.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec3& n = normals[i];
    if (std::abs(n.norm() - 1.0) > 1e-9) {
      throw InvalidArgument("make_waypoints: normal " + std::to_string(i) + " is not unit");
    }
    out.push_back({points[i] + standoff * n, -n, points[i], tangent_axis(n), std::nullopt});
  }
  return out;
}

inline double path_length(std::span<const Waypoint> wps, std::span<const std::size_t> order) {
  double len = 0.0;
  for (std::size_t i = 1; i < order.size(); ++i) {
    len += (wps[order[i]].position - wps[order[i - 1]].position).norm();
  }
  return len;
}

inline std::vector<Waypoint> apply_order(std::span<const Waypoint> wps,
                                         std::span<const std::size_t> order) {
  std::vector<Waypoint> out;
  out.reserve(order.size());
  for (auto i : order) out.push_back(wps[i]);
  return out;
}

/// Boustrophedon order over the surface points. Points are projected onto
/// their two principal axes; rows of width `row_width` are stacked along the
/// minor axis (rows centered on the lowest minor coordinate) and each row is
/// swept along the major axis, alternating direction row to row.
inline std::vector<std::size_t> order_zigzag(std::span<const Waypoint> wps, double row_width) {
  if (!(row_width > 0.0)) throw InvalidArgument("order_zigzag: row width must be > 0");
  const std::size_t n = wps.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (n < 2) return order;

  Vec3 mean = Vec3::Zero();
  for (const auto& w : wps) mean += w.surface_point;
  mean /= static_cast<double>(n);
  Mat3 cov = Mat3::Zero();
  for (const auto& w : wps) {
    const Vec3 d = w.surface_point - mean;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
  auto canonical = [](Vec3 a) {
    Eigen::Index k;
    a.cwiseAbs().maxCoeff(&k);
    return a(k) < 0 ? Vec3(-a) : a;
  };
  Vec3 major = canonical(es.eigenvectors().col(2));
  Vec3 minor = canonical(es.eigenvectors().col(1));
  const auto& ev = es.eigenvalues();
  if (ev(2) - ev(1) <= 1e-9 * ev(2)) {
    // Isotropic spread: the principal axes are arbitrary, so sweep along the
    // first world axis that has extent in the point plane.
    const Vec3 normal = es.eigenvectors().col(0);
    for (const Vec3& axis : {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()}) {
      const Vec3 a = axis - axis.dot(normal) * normal;
      if (a.norm() > 1e-6) {
        major = a.normalized();
        break;
      }
    }
    minor = canonical(normal.cross(major).normalized());
  }

  std::vector<double> along(n), across(n);
  double across_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 d = wps[i].surface_point - mean;
    along[i] = d.dot(major);
    across[i] = d.dot(minor);
    across_min = std::min(across_min, across[i]);
  }
  std::vector<long> row(n);
  for (std::size_t i = 0; i < n; ++i) {
    row[i] = static_cast<long>(std::floor((across[i] - across_min) / row_width + 0.5));
  }
  // Direction alternates over occupied rows, so empty bands do not break the sweep.
  std::vector<long> occupied(row);
  std::sort(occupied.begin(), occupied.end());
  occupied.erase(std::unique(occupied.begin(), occupied.end()), occupied.end());
  std::vector<bool> reversed_row(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto rank = std::lower_bound(occupied.begin(), occupied.end(), row[i]) - occupied.begin();
    reversed_row[i] = (rank % 2) != 0;
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (row[a] != row[b]) return row[a] < row[b];
    const bool reverse = reversed_row[a];
    if (along[a] != along[b]) return reverse ? along[a] > along[b] : along[a] < along[b];
    return a < b;
  });
  return order;
}

struct TspResult {
  std::vector<std::size_t> order;
  double seed_length = 0.0;
  double final_length = 0.0;
  std::vector<double> history;  // path length after the seed and each accepted swap
};

/// Open-path TSP: nearest-neighbor tour from the waypoint closest to `base`,
/// improved by 2-opt segment reversals (start fixed, end free) until no
/// reversal shortens the path.
inline TspResult order_tsp(std::span<const Waypoint> wps, const Vec3& base = Vec3::Zero()) {
  TspResult r;
  const std::size_t n = wps.size();
  if (n == 0) return r;
  auto dist = [&](std::size_t a, std::size_t b) {
    return (wps[a].position - wps[b].position).norm();
  };

  std::size_t start = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if ((wps[i].position - base).norm() < (wps[start].position - base).norm()) start = i;
  }
  std::vector<bool> used(n, false);
  r.order.push_back(start);
  used[start] = true;
  while (r.order.size() < n) {
    const std::size_t cur = r.order.back();
    std::size_t best = n;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (used[j]) continue;
      const double d = dist(cur, j);
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    used[best] = true;
    r.order.push_back(best);
  }
  r.seed_length = path_length(wps, r.order);
  r.history.push_back(r.seed_length);

  auto& p = r.order;
  constexpr double eps = 1e-12;
  bool improved = true;
  while (improved) {
    improved = false;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        double delta = dist(p[i - 1], p[j]) - dist(p[i - 1], p[i]);
        if (j + 1 < n) delta += dist(p[i], p[j + 1]) - dist(p[j], p[j + 1]);
        if (delta < -eps) {
          std::reverse(p.begin() + static_cast<std::ptrdiff_t>(i),
                       p.begin() + static_cast<std::ptrdiff_t>(j) + 1);
          r.history.push_back(path_length(wps, p));
          improved = true;
        }
      }
    }
  }
  r.final_length = path_length(wps, p);
  return r;
}

}  // namespace uvsel

#endif  // UVSEL_PLANNING_HPP
