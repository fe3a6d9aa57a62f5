#include "nfsense/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nfsense/error.hpp"
#include "nfsense/types.hpp"

namespace nfsense {

double Grid::min_pitch() const {
  double p = pitch(0);
  for (int a = 1; a < dimensionality(); ++a) p = std::min(p, pitch(a));
  return p;
}

double Grid::coordinate(int axis, Index m) const {
  auto const n = static_cast<double>(dims[axis]);
  return pitch(axis) * (static_cast<double>(m) - (n - 1.0) / 2.0);
}

void Grid::validate() const {
  for (int a = 0; a < 3; ++a) {
    require(dims[a] >= 1, "grid extent along axis " + std::to_string(a) + " must be >= 1");
    require(std::isfinite(fov[a]) && fov[a] > 0.0, "grid FOV along axis " + std::to_string(a) + " must be > 0");
  }
}

Eigen::MatrixXd grid_coordinates(Grid const& grid) {
  grid.validate();
  Eigen::MatrixXd coords(grid.size(), 3);
  for (Index l = 0; l < grid.size(); ++l) {
    auto const idx = grid.unravel(l);
    for (int a = 0; a < 3; ++a) coords(l, a) = grid.coordinate(a, idx[a]);
  }
  return coords;
}

void RawCoilData::validate() const {
  require(samples.rows() >= 1 && samples.cols() >= 1, "raw coil data must have K >= 1 and at least one coil");
  require(samples.allFinite(), "raw coil data contains non-finite samples");
}

void TemporalBasis::validate() const {
  require(matrix.rows() >= 1 && matrix.cols() >= 1, "temporal basis is empty");
  require(matrix.allFinite(), "temporal basis contains non-finite entries");
  for (Index k = 1; k < matrix.rows(); ++k)
    require(matrix(k, 0) >= matrix(k - 1, 0), "sample times must be non-decreasing");
}

void SpatialBasis::validate() const {
  require(matrix.rows() >= 1, "spatial basis is empty");
  require(matrix.allFinite(), "spatial basis contains non-finite entries");
}

void PrescanData::validate() const {
  require(echoes.size() >= 2, "prescan needs at least two echoes");
  require(te_s.size() == echoes.size(), "prescan echo-time count does not match echo count");
  for (auto const& e : echoes)
    require(e.rows() == echoes.front().rows() && e.cols() == echoes.front().cols(),
            "prescan echoes differ in shape");
  double const spacing = te_s[1] - te_s[0];
  require(spacing > 0.0, "prescan echo spacing must be positive");
  for (std::size_t n = 1; n < te_s.size(); ++n) {
    require(te_s[n] > te_s[n - 1], "prescan echo times must be strictly increasing");
    require(std::abs((te_s[n] - te_s[n - 1]) - spacing) <= 1e-9 * std::max(1.0, std::abs(spacing)) + 1e-12,
            "prescan echo times must be uniformly spaced");
  }
}

} // namespace nfsense
