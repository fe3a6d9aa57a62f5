#include "nfsense/b0map.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nfsense/error.hpp"

namespace nfsense {

std::vector<ComplexVector> coil_combine(PrescanData const& prescan, SensitivityMaps const& maps) {
  prescan.validate();
  require(maps.maps.rows() == prescan.voxels() && maps.maps.cols() == prescan.coils(),
          "coil_combine: sensitivity maps do not match prescan");
  RealVector const denom = maps.maps.rowwise().squaredNorm();
  std::vector<ComplexVector> out;
  for (auto const& echo : prescan.echoes) {
    ComplexVector rho = ComplexVector::Zero(prescan.voxels());
    for (Index l = 0; l < prescan.voxels(); ++l)
      if (denom(l) > 0.0) rho(l) = (maps.maps.row(l).conjugate().array() * echo.row(l).array()).sum() / denom(l);
    out.push_back(std::move(rho));
  }
  return out;
}

std::vector<RealVector> relative_phases(std::vector<ComplexVector> const& images) {
  require(!images.empty(), "relative_phases: no images");
  std::vector<RealVector> out;
  for (auto const& img : images) {
    RealVector phase(img.size());
    for (Index l = 0; l < img.size(); ++l) phase(l) = std::arg(img(l) * std::conj(images.front()(l)));
    out.push_back(std::move(phase));
  }
  return out;
}

std::vector<double> unwrap_temporal(std::span<double const> phases) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  std::vector<double> out(phases.begin(), phases.end());
  double wraps = 0.0;
  for (std::size_t n = 1; n < phases.size(); ++n) {
    double d = phases[n] + two_pi * wraps - out[n - 1];
    while (d > std::numbers::pi) {
      wraps -= 1.0;
      d -= two_pi;
    }
    while (d <= -std::numbers::pi) {
      wraps += 1.0;
      d += two_pi;
    }
    out[n] = phases[n] + two_pi * wraps;
  }
  return out;
}

std::vector<RealVector> unwrap_temporal(std::vector<RealVector> const& phases) {
  require(!phases.empty(), "unwrap_temporal: no echoes");
  Index const L = phases.front().size();
  std::vector<RealVector> out(phases.size(), RealVector(L));
  std::vector<double> series(phases.size());
  for (Index l = 0; l < L; ++l) {
    for (std::size_t n = 0; n < phases.size(); ++n) series[n] = phases[n](l);
    auto const u = unwrap_temporal(series);
    for (std::size_t n = 0; n < phases.size(); ++n) out[n](l) = u[n];
  }
  return out;
}

FieldMap fit_phase_evolution(std::vector<RealVector> const& unwrapped, double dte) {
  auto const N = static_cast<Index>(unwrapped.size());
  if (N < 3) fail(ErrorKind::InvalidArgument, "phase fit needs at least 3 echoes (two regressors)");
  require(dte > 0.0, "phase fit: echo spacing must be > 0");
  Index const L = unwrapped.front().size();

  // Normal equations of the two regressors a_n = n * dte, b_n = n mod 2.
  double saa = 0.0, sab = 0.0, sbb = 0.0;
  for (Index n = 0; n < N; ++n) {
    double const a = static_cast<double>(n) * dte;
    double const b = static_cast<double>(n % 2);
    saa += a * a;
    sab += a * b;
    sbb += b * b;
  }
  double const det = saa * sbb - sab * sab;

  FieldMap out;
  out.b0.resize(L);
  out.beta.resize(L);
  out.std_error.resize(L);
  for (Index l = 0; l < L; ++l) {
    double ya = 0.0, yb = 0.0;
    for (Index n = 0; n < N; ++n) {
      double const y = unwrapped[static_cast<std::size_t>(n)](l);
      ya += static_cast<double>(n) * dte * y;
      yb += static_cast<double>(n % 2) * y;
    }
    double const b0 = (sbb * ya - sab * yb) / det;
    double const beta = (saa * yb - sab * ya) / det;
    double ss = 0.0;
    for (Index n = 0; n < N; ++n) {
      double const e = unwrapped[static_cast<std::size_t>(n)](l) - b0 * static_cast<double>(n) * dte -
                       beta * static_cast<double>(n % 2);
      ss += e * e;
    }
    out.b0(l) = b0;
    out.beta(l) = beta;
    out.std_error(l) = std::sqrt(ss / static_cast<double>(N));
  }
  return out;
}

Index count_near_nyquist(FieldMap const& field, double dte, double fraction) {
  double const limit = fraction * std::numbers::pi / dte;
  return (field.b0.array().abs() > limit).count();
}

double default_alpha_b(Grid const& grid, FieldMap const& field) {
  std::vector<double> eps2;
  for (Index l = 0; l < field.std_error.size(); ++l)
    if (field.std_error(l) > 0.0) eps2.push_back(field.std_error(l) * field.std_error(l));
  if (eps2.empty()) return 0.0;
  auto mid = eps2.begin() + static_cast<std::ptrdiff_t>(eps2.size() / 2);
  std::nth_element(eps2.begin(), mid, eps2.end());
  double const h = grid.min_pitch();
  return h * h / *mid;
}

B0Smoothing smooth_b0(Grid const& grid, FieldMap const& field, B0SmoothingOptions const& options) {
  Index const L = grid.size();
  require(field.b0.size() == L && field.std_error.size() == L, "smooth_b0: field map does not match grid");
  require(options.alpha >= 0.0, "smooth_b0: alpha must be >= 0");
  require((field.std_error.array() >= 0.0).all(), "smooth_b0: standard error must be >= 0");

  Mask const everywhere = Mask::Constant(L, true);
  std::vector<WeightedBlock> blocks;
  blocks.push_back({RealVector::Ones(L), SparseMatrix::identity(L)});
  RealVector const w = std::sqrt(options.alpha) * field.std_error;
  if (options.alpha > 0.0)
    for (int axis = 0; axis < grid.dimensionality(); ++axis)
      blocks.push_back({w, difference_operator(grid, axis, 1, everywhere)});
  auto const a = assemble_normal_equations(blocks);
  auto const precond = Preconditioner::build(options.precond, a);
  auto const result = pcg_solve(a, normal_rhs(blocks.front(), field.b0), precond, options.tol, options.max_iter);
  return {result.x, result.iterations};
}

} // namespace nfsense
