#pragma once

#include "nfsense/types.hpp"

namespace nfsense {

/// Root-sum-of-squares coil combination of one prescan echo.
RealVector rss_combine(PrescanData const& prescan, Index echo);

struct BiasFit {
  RealVector field;  // strictly positive, mean 1 over the fit mask
  Index coefficients = 0;
};

/// Smooth multiplicative intensity field: exp of a least-squares polynomial
/// (total degree <= `degree`) fitted to log(mag) over `rough_mask`.
BiasFit estimate_bias_field(Grid const& grid, RealVector const& mag, Mask const& rough_mask, int degree = 3);

/// Default fit mask, mag > 0.1 * max(mag).
Mask default_rough_mask(RealVector const& mag);

struct HistogramThreshold {
  double threshold = 0.0;
  RealVector counts;      // smoothed histogram of log(mag)
  double log_min = 0.0;
  double bin_width = 0.0;
};

inline constexpr int kThresholdBins = 256;
inline constexpr int kThresholdSmoothing = 5;

/// Threshold at the deepest histogram valley of log(mag) between the two
/// highest peaks. Throws when the histogram has no interior minimum.
HistogramThreshold trusted_threshold(RealVector const& mag_corrected);

// Morphology on the voxel grid. Components use 8/26-connectivity, hole
// filling uses 4/6-connectivity of the complement.
Mask largest_component(Grid const& grid, Mask const& mask);
Mask fill_holes(Grid const& grid, Mask const& mask);
Mask dilate(Grid const& grid, Mask const& mask, Index radius);

MaskPair compute_masks(Grid const& grid, RealVector const& mag_corrected, double threshold, Index dilation_radius = 2);

} // namespace nfsense
