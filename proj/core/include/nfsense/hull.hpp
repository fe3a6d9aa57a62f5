#pragma once

#include <array>
#include <span>
#include <vector>

#include "nfsense/types.hpp"

namespace nfsense {

/// Convex hull of a 2D or 3D point cloud, kept as outward half-spaces
/// normal . x <= offset with unit normals.
class ConvexHull {
 public:
  struct HalfSpace {
    std::array<double, 3> normal{0.0, 0.0, 0.0};
    double offset = 0.0;
  };

  /// `points` is K x d with d in {2, 3}. Throws on collinear (2D) or
  /// coplanar (3D) input.
  static ConvexHull fit(RealMatrix const& points);

  int dimension() const { return dimension_; }
  /// Largest distance of an input point from the origin.
  double radius() const { return radius_; }
  std::vector<HalfSpace> const& facets() const { return facets_; }
  /// Hull vertices (2D: counter-clockwise order).
  std::vector<std::array<double, 3>> const& vertices() const { return vertices_; }

  /// Largest signed distance of `point` outside any facet (<= 0 inside).
  double excess(std::span<double const> point) const;
  bool contains(std::span<double const> point, double tol) const { return excess(point) <= tol; }

 private:
  int dimension_ = 0;
  double radius_ = 0.0;
  std::vector<HalfSpace> facets_;
  std::vector<std::array<double, 3>> vertices_;
};

} // namespace nfsense
