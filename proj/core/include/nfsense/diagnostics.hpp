#pragma once

#include <optional>
#include <vector>

#include "nfsense/types.hpp"

namespace nfsense {

struct SsimOptions {
  Index window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

struct SsimResult {
  double mean = 0.0;
  RealVector map;
};

/// Structural similarity with a Gaussian window. Near the grid border the
/// window is truncated and renormalised. The dynamic range is
/// max(ref) - min(ref). The mean is taken over `mask` when given.
SsimResult ssim(Grid const& grid, RealVector const& test, RealVector const& ref, SsimOptions const& options = {},
                Mask const* mask = nullptr);
/// Complex images are compared by magnitude.
SsimResult ssim(Grid const& grid, ComplexVector const& test, ComplexVector const& ref, SsimOptions const& options = {},
                Mask const* mask = nullptr);

/// sqrt(mean |test - ref|^2) / sqrt(mean |ref|^2) over `mask` (all voxels when null).
double rmse(ComplexVector const& test, ComplexVector const& ref, Mask const* mask = nullptr);
double rmse(RealVector const& test, RealVector const& ref, Mask const* mask = nullptr);

struct LCurveCorner {
  Index index = 0;          // 0-based position in the log
  RealVector curvature;     // per logged iteration (0 at the ends)
  double max_curvature = 0.0;
  bool low_confidence = false;
};

inline constexpr Index kLCurveSmoothing = 5;

/// Maximum-curvature point of (log ||r_n||, log ||rho_n||) after a width-5
/// moving average, using central differences in the iteration index.
LCurveCorner lcurve_corner(std::vector<double> const& residual_norm, std::vector<double> const& solution_norm);

} // namespace nfsense
