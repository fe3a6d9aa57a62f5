#pragma once

#include <span>
#include <vector>

#include "nfsense/sparse.hpp"
#include "nfsense/types.hpp"

namespace nfsense {

/// Matched-filter coil combination per echo:
/// rho_n = sum_c conj(S_c) m_{n,c} / sum_c |S_c|^2 (0 where the denominator is 0).
std::vector<ComplexVector> coil_combine(PrescanData const& prescan, SensitivityMaps const& maps);

/// Per-voxel phase of each echo relative to the first echo.
std::vector<RealVector> relative_phases(std::vector<ComplexVector> const& images);

/// Adds integer multiples of 2*pi so every consecutive difference lies in (-pi, pi].
std::vector<double> unwrap_temporal(std::span<double const> phases);
std::vector<RealVector> unwrap_temporal(std::vector<RealVector> const& phases);

/// Per-voxel least squares of phi_n = b0 * n * dte + beta * (n mod 2), no
/// intercept, n = 0..N-1; std_error = sqrt(sum residual^2 / N).
FieldMap fit_phase_evolution(std::vector<RealVector> const& unwrapped, double dte);

/// Voxels whose |b0| exceeds `fraction` of the temporal-unwrapping limit pi/dte.
Index count_near_nyquist(FieldMap const& field, double dte, double fraction = 0.8);

struct B0SmoothingOptions {
  double alpha = 0.0;
  PreconditionerKind precond = PreconditionerKind::IncompleteCholesky;
  double tol = 1e-8;
  Index max_iter = 2000;
};

/// h^2 / median(eps^2 > 0): makes the median eps-weighted first-difference row unit weight.
double default_alpha_b(Grid const& grid, FieldMap const& field);

struct B0Smoothing {
  RealVector b0;
  Index iterations = 0;
};

/// Identity data block on every voxel plus first-difference blocks weighted
/// by sqrt(alpha) * eps per voxel, solved through the normal equations.
B0Smoothing smooth_b0(Grid const& grid, FieldMap const& field, B0SmoothingOptions const& options);

} // namespace nfsense
