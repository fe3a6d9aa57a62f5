#pragma once

#include <string>
#include <vector>

#include "nfsense/types.hpp"

namespace nfsense {

/// Real solid harmonics up to third order, in nested order (all first-order
/// terms, then second, then third):
///   1: x, y, z
///   2: xy, zy, 2z^2 - x^2 - y^2, zx, x^2 - y^2
///   3: 3yx^2 - y^3, xyz, 5yz^2 - y r^2, 2z^3 - 3z(x^2 + y^2), 5xz^2 - x r^2,
///      z(x^2 - y^2), x^3 - 3xy^2
/// On 2D grids terms that vanish identically at z = 0 are dropped.
struct HarmonicTerm {
  int order;
  std::string name;
  bool uses_z_only; // identically zero on the z = 0 plane
};

std::vector<HarmonicTerm> harmonic_terms(int order, int dimensionality);

/// Number of dynamic field terms P for a field model.
Index field_term_count(int order, int dimensionality, bool global_term);

/// terms x L matrix of harmonic values at the given L x 3 coordinates (metres).
RealMatrix solid_harmonics(int order, RealMatrix const& coords, int dimensionality = 3);

} // namespace nfsense
