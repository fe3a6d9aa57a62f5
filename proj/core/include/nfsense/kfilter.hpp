#pragma once

#include "nfsense/types.hpp"

namespace nfsense {

/// L x 3 k-space coordinates (rad/m) of the centred Cartesian FFT grid:
/// dk_i * (m - n_i / 2) with dk_i = 2 pi / fov_i. Axes of extent 1 are 0.
RealMatrix cartesian_k_grid(Grid const& grid);

/// Binary filter: 1 for Cartesian grid points inside or on the convex hull of
/// `k_coords` (K x d, first d columns used), else 0. With `per_slice`, or
/// when the grid or the trajectory is two-dimensional, the hull of (kx, ky)
/// is applied to every kz plane.
KSpaceFilter build_filter(RealMatrix const& k_coords, Grid const& grid, bool per_slice = false);

/// Grows a binary filter by a ball of `radius` grid points.
KSpaceFilter dilate_filter(KSpaceFilter const& filter, Grid const& grid, Index radius);

/// IFFT(FFT(image) .* f) with DC at the grid centre, matching cartesian_k_grid.
ComplexVector apply_filter(ComplexVector const& image, Grid const& grid, KSpaceFilter const& filter);
ReconImage apply_filter(ReconImage const& image, KSpaceFilter const& filter);

} // namespace nfsense
