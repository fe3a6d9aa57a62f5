#pragma once

#include <array>

#include <Eigen/Core>

namespace nfsense {

using Index = Eigen::Index;

/// Voxel grid geometry. Voxels are enumerated with x fastest, then y, then z;
/// every module uses this linear order.
struct Grid {
  std::array<Index, 3> dims{1, 1, 1};
  std::array<double, 3> fov{1.0, 1.0, 1.0}; // metres

  Grid() = default;
  Grid(std::array<Index, 3> d, std::array<double, 3> f) : dims(d), fov(f) {}

  Index size() const { return dims[0] * dims[1] * dims[2]; }
  /// 3 when nz > 1, otherwise 2 (or 1 for a single row).
  int dimensionality() const { return dims[2] > 1 ? 3 : (dims[1] > 1 ? 2 : 1); }
  double pitch(int axis) const { return fov[axis] / static_cast<double>(dims[axis]); }
  double min_pitch() const;

  Index linear(Index x, Index y, Index z) const { return x + dims[0] * (y + dims[1] * z); }
  std::array<Index, 3> unravel(Index l) const {
    return {l % dims[0], (l / dims[0]) % dims[1], l / (dims[0] * dims[1])};
  }

  /// Centred coordinate of index m along an axis: pitch * (m - (n-1)/2).
  double coordinate(int axis, Index m) const;

  void validate() const;

  bool operator==(Grid const&) const = default;
};

/// L x 3 voxel-centre coordinates in metres.
Eigen::MatrixXd grid_coordinates(Grid const& grid);

} // namespace nfsense
