#include "nfsense/kfilter.hpp"

#include <cmath>
#include <mutex>
#include <numbers>

#include <fftw3.h>

#include "nfsense/error.hpp"
#include "nfsense/hull.hpp"
#include "nfsense/masks.hpp"

namespace nfsense {

RealMatrix cartesian_k_grid(Grid const& grid) {
  grid.validate();
  RealMatrix k = RealMatrix::Zero(grid.size(), 3);
  for (Index l = 0; l < grid.size(); ++l) {
    auto const idx = grid.unravel(l);
    for (int a = 0; a < 3; ++a) {
      if (grid.dims[a] == 1) continue;
      double const dk = 2.0 * std::numbers::pi / grid.fov[a];
      k(l, a) = dk * (static_cast<double>(idx[a]) - static_cast<double>(grid.dims[a] / 2));
    }
  }
  return k;
}

KSpaceFilter build_filter(RealMatrix const& k_coords, Grid const& grid, bool per_slice) {
  require(k_coords.cols() >= 2, "k-space filter needs at least two k-coordinate columns");
  bool const planar = per_slice || grid.dimensionality() < 3 || k_coords.cols() == 2;
  Index const d = planar ? 2 : 3;
  auto const hull = ConvexHull::fit(k_coords.leftCols(d));
  double const tol = 1e-9 * hull.radius();
  RealMatrix const kgrid = cartesian_k_grid(grid);

  KSpaceFilter out;
  out.mask = RealVector::Zero(grid.size());
#pragma omp parallel for schedule(static)
  for (Index l = 0; l < grid.size(); ++l) {
    double const q[3] = {kgrid(l, 0), kgrid(l, 1), kgrid(l, 2)};
    out.mask(l) = hull.contains(std::span<double const>(q, static_cast<std::size_t>(d)), tol) ? 1.0 : 0.0;
  }
  return out;
}

KSpaceFilter dilate_filter(KSpaceFilter const& filter, Grid const& grid, Index radius) {
  require(filter.mask.size() == grid.size(), "filter does not match grid");
  Mask const grown = dilate(grid, filter.mask.array() > 0.5, radius);
  return {grown.cast<double>().matrix()};
}

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

void fft_inplace(ComplexVector& data, Grid const& grid, int sign) {
  // FFTW is row-major: the last extent varies fastest, so pass {nz, ny, nx}.
  int const n[3] = {static_cast<int>(grid.dims[2]), static_cast<int>(grid.dims[1]), static_cast<int>(grid.dims[0])};
  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft(3, n, ptr, ptr, sign, FFTW_ESTIMATE);
  }
  if (!plan) fail(ErrorKind::Numerical, "FFTW could not create a plan");
  fftw_execute(plan);
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(plan);
}

} // namespace

ComplexVector apply_filter(ComplexVector const& image, Grid const& grid, KSpaceFilter const& filter) {
  if (image.size() != grid.size() || filter.mask.size() != grid.size())
    fail(ErrorKind::SizeMismatch, "apply_filter: image, filter and grid sizes differ");
  ComplexVector spectrum = image;
  // The encoding model uses exp(+i k r), so the forward "FFT" here is FFTW's backward transform.
  fft_inplace(spectrum, grid, FFTW_BACKWARD);
  for (Index q = 0; q < grid.size(); ++q) {
    auto const idx = grid.unravel(q);
    Index centred[3];
    for (int a = 0; a < 3; ++a) centred[a] = (idx[a] + grid.dims[a] / 2) % grid.dims[a];
    spectrum(q) *= filter.mask(grid.linear(centred[0], centred[1], centred[2]));
  }
  fft_inplace(spectrum, grid, FFTW_FORWARD);
  spectrum /= static_cast<double>(grid.size());
  return spectrum;
}

ReconImage apply_filter(ReconImage const& image, KSpaceFilter const& filter) {
  ReconImage out = image;
  out.values = apply_filter(image.values, image.grid, filter);
  return out;
}

} // namespace nfsense
