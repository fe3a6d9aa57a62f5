#pragma once

#include <vector>

#include "nfsense/sparse.hpp"
#include "nfsense/types.hpp"

namespace nfsense {

/// Initial per-voxel sensitivity estimates on the trusted mask.
struct RawSensitivity {
  ComplexMatrix maps; // L x coils, zero outside the trusted mask
  Mask flagged;       // trusted voxels whose prescan data were all zero
};

/// First left singular vector of the coils x echoes prescan matrix at each
/// trusted voxel, scaled by sigma_1 / sqrt(N). The phase is anchored so that
/// <u, first-echo coil vector> is real and non-negative.
RawSensitivity estimate_svd(PrescanData const& prescan, Mask const& trusted);

struct SmoothingOptions {
  double alpha = 0.0;
  PreconditionerKind precond = PreconditionerKind::IncompleteCholesky;
  double tol = 1e-8;
  Index max_iter = 2000;
};

/// 1e-2 * h^4 for the smallest voxel pitch h.
double default_alpha_s(Grid const& grid);

/// Sparse least-squares smoother for maps: data fidelity on the trusted mask,
/// second-derivative penalty weighted by sqrt(alpha) on the reconstruction
/// mask. Unknowns are the reconstruction-mask voxels only. The normal matrix
/// and preconditioner are built once and reused for every column.
class MapSmoother {
 public:
  MapSmoother(Grid const& grid, Mask const& trusted, Mask const& recon, SmoothingOptions const& options);

  RealMatrix smooth(RealMatrix const& raw);
  ComplexMatrix smooth(ComplexMatrix const& raw);

  SparseMatrix const& normal_matrix() const { return normal_; }
  std::vector<Index> const& unknowns() const { return unknowns_; }
  /// PCG iteration counts of every solve so far.
  std::vector<Index> const& iterations() const { return iterations_; }
  double preconditioner_shift() const { return precond_.shift(); }

 private:
  RealVector solve_column(RealVector const& observation);

  Index voxels_ = 0;
  SmoothingOptions options_;
  std::vector<Index> unknowns_;
  WeightedBlock data_block_;
  SparseMatrix normal_;
  Preconditioner precond_;
  std::vector<Index> iterations_;
};

RealMatrix smooth_extrapolate(Grid const& grid, RealMatrix const& raw, Mask const& trusted, Mask const& recon,
                              SmoothingOptions const& options);
ComplexMatrix smooth_extrapolate(Grid const& grid, ComplexMatrix const& raw, Mask const& trusted, Mask const& recon,
                                 SmoothingOptions const& options);

/// Smooths |S| and S/|S| separately and recombines them as
/// smoothed magnitude * (smoothed unit / |smoothed unit|).
SensitivityMaps recombine(Grid const& grid, RawSensitivity const& raw, Mask const& trusted, Mask const& recon,
                          SmoothingOptions const& options);

/// j_l = 1 / sqrt(sum_coils |S_l|^2) inside the reconstruction mask, 0 elsewhere.
RealVector intensity_correction(SensitivityMaps const& maps, Mask const& recon);

} // namespace nfsense
