#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "nfsense/grid.hpp"

namespace nfsense {

using Cx = std::complex<double>;
using RealVector = Eigen::VectorXd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using ComplexMatrix = Eigen::MatrixXcd;
using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;

/// K x coils matrix of acquired samples.
struct RawCoilData {
  ComplexMatrix samples;

  Index samples_count() const { return samples.rows(); }
  Index coils() const { return samples.cols(); }
  void validate() const;
};

/// K x (P+1) temporal basis of the phase model. Column 0 holds the sample
/// times in seconds, the remaining columns the dynamic field terms k_p(t).
struct TemporalBasis {
  RealMatrix matrix;

  Index samples_count() const { return matrix.rows(); }
  Index terms() const { return matrix.cols(); }
  auto times() const { return matrix.col(0); }
  void validate() const;
};

/// (P+1) x L spatial basis. Row 0 is B0 in rad/s, rows 1.. the spatial
/// basis functions evaluated at the voxel centres.
struct SpatialBasis {
  RealMatrix matrix;

  Index terms() const { return matrix.rows(); }
  Index voxels() const { return matrix.cols(); }
  void validate() const;
};

/// L x coils complex sensitivities, zero outside the reconstruction mask.
struct SensitivityMaps {
  ComplexMatrix maps;

  Index voxels() const { return maps.rows(); }
  Index coils() const { return maps.cols(); }
};

struct MaskPair {
  Mask trusted;
  Mask recon;
};

/// Per-voxel off-resonance (rad/s), even/odd echo offset (rad) and fit
/// standard error (rad).
struct FieldMap {
  RealVector b0;
  RealVector beta;
  RealVector std_error;
};

struct ReconImage {
  Grid grid;
  ComplexVector values;
  Index iterations = 0;
  double residual_norm = 0.0;
  double solution_norm = 0.0;
};

/// Real weights on the centred Cartesian FFT grid, values in [0, 1].
struct KSpaceFilter {
  RealVector mask;
};

/// Multi-echo, multi-coil prescan. echoes[n] is an L x coils image set.
struct PrescanData {
  std::vector<ComplexMatrix> echoes;
  std::vector<double> te_s;

  Index echo_count() const { return static_cast<Index>(echoes.size()); }
  Index coils() const { return echoes.empty() ? 0 : echoes.front().cols(); }
  Index voxels() const { return echoes.empty() ? 0 : echoes.front().rows(); }
  double echo_spacing() const { return te_s.size() < 2 ? 0.0 : te_s[1] - te_s[0]; }
  void validate() const;
};

inline std::vector<Index> mask_indices(Mask const& mask) {
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(mask.count()));
  for (Index l = 0; l < mask.size(); ++l)
    if (mask(l)) out.push_back(l);
  return out;
}

} // namespace nfsense
