// Nearest-neighbor queries: exact k-NN over an R-tree and a uniform grid
// hash for fixed-radius "any point closer than r" tests.

#ifndef UVSEL_NEIGHBORS_HPP
#define UVSEL_NEIGHBORS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include <boost/geometry.hpp>
#include <boost/geometry/geometries/point.hpp>
#include <boost/geometry/index/rtree.hpp>

#include "uvsel/core.hpp"

namespace uvsel {

/// Exact k-nearest-neighbor index over a fixed point set.
class KnnIndex {
 public:
  explicit KnnIndex(std::span<const Vec3> points) : points_(points) {
    std::vector<Value> values;
    values.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      values.emplace_back(BPoint(points[i].x(), points[i].y(), points[i].z()), i);
    }
    tree_ = Tree(values.begin(), values.end());  // packed bulk load
  }

  /// Indices of the k points nearest to points[i], excluding i itself, sorted
  /// by ascending distance (ties by ascending index).
  std::vector<std::size_t> neighbors_of(std::size_t i, std::size_t k) const {
    std::vector<Value> hits;
    hits.reserve(k);
    const auto& p = points_[i];
    tree_.query(boost::geometry::index::nearest(BPoint(p.x(), p.y(), p.z()), static_cast<unsigned>(k)) &&
                    boost::geometry::index::satisfies([i](const Value& v) { return v.second != i; }),
                std::back_inserter(hits));
    return sorted_indices(p, hits);
  }

  /// Indices of the k points nearest to q (q may or may not be in the set).
  std::vector<std::size_t> nearest(const Vec3& q, std::size_t k) const {
    std::vector<Value> hits;
    hits.reserve(k);
    tree_.query(boost::geometry::index::nearest(BPoint(q.x(), q.y(), q.z()), static_cast<unsigned>(k)),
                std::back_inserter(hits));
    return sorted_indices(q, hits);
  }

 private:
  using BPoint = boost::geometry::model::point<double, 3, boost::geometry::cs::cartesian>;
  using Value = std::pair<BPoint, std::size_t>;
  using Tree = boost::geometry::index::rtree<Value, boost::geometry::index::quadratic<16>>;

  std::vector<std::size_t> sorted_indices(const Vec3& q, const std::vector<Value>& hits) const {
    std::vector<std::pair<double, std::size_t>> order;
    order.reserve(hits.size());
    for (const auto& h : hits) order.emplace_back(squared_distance(q, points_[h.second]), h.second);
    std::sort(order.begin(), order.end());
    std::vector<std::size_t> out;
    out.reserve(order.size());
    for (const auto& o : order) out.push_back(o.second);
    return out;
  }

  std::span<const Vec3> points_;
  Tree tree_;
};

/// Uniform grid hash with cell edge `cell`. Answers whether any indexed point
/// lies strictly closer than `cell` to a query by scanning the 27 cells around
/// the query's cell.
class GridHash {
 public:
  GridHash(std::span<const Vec3> points, double cell) : points_(points), cell_(cell) {
    if (!(cell > 0.0)) throw InvalidArgument("GridHash: cell size must be > 0");
    cells_.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) cells_[cell_of(points[i])].push_back(i);
  }

  /// radius must not exceed the cell size.
  bool any_within(const Vec3& q, double radius) const {
    if (radius > cell_) throw InvalidArgument("GridHash: radius exceeds cell size");
    const double r2 = radius * radius;
    const auto c = cell_of(q);
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          auto it = cells_.find({c.x + dx, c.y + dy, c.z + dz});
          if (it == cells_.end()) continue;
          for (auto idx : it->second) {
            if (squared_distance(q, points_[idx]) < r2) return true;
          }
        }
      }
    }
    return false;
  }

 private:
  struct Cell {
    std::int64_t x, y, z;
    bool operator==(const Cell&) const = default;
  };
  struct CellHash {
    std::size_t operator()(const Cell& c) const {
      std::uint64_t h = static_cast<std::uint64_t>(c.x) * 73856093u;
      h ^= static_cast<std::uint64_t>(c.y) * 19349663u;
      h ^= static_cast<std::uint64_t>(c.z) * 83492791u;
      return static_cast<std::size_t>(h);
    }
  };

  Cell cell_of(const Vec3& p) const {
    return {static_cast<std::int64_t>(std::floor(p.x() / cell_)),
            static_cast<std::int64_t>(std::floor(p.y() / cell_)),
            static_cast<std::int64_t>(std::floor(p.z() / cell_))};
  }

  std::span<const Vec3> points_;
  double cell_;
  std::unordered_map<Cell, std::vector<std::size_t>, CellHash> cells_;
};

}  // namespace uvsel

#endif  // UVSEL_NEIGHBORS_HPP
