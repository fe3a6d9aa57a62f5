#include "nfsense/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "nfsense/error.hpp"

namespace nfsense {

namespace {

// Truncated, renormalised separable Gaussian smoothing along every axis with extent > 1.
RealVector gaussian_filter(Grid const& grid, RealVector const& in, std::vector<double> const& taps) {
  Index const radius = static_cast<Index>(taps.size()) / 2;
  RealVector cur = in;
  RealVector next(in.size());
  for (int axis = 0; axis < 3; ++axis) {
    Index const n = grid.dims[axis];
    if (n == 1) continue;
    Index const stride = axis == 0 ? 1 : (axis == 1 ? grid.dims[0] : grid.dims[0] * grid.dims[1]);
#pragma omp parallel for schedule(static)
    for (Index l = 0; l < in.size(); ++l) {
      Index const m = grid.unravel(l)[static_cast<std::size_t>(axis)];
      double sum = 0.0, wsum = 0.0;
      for (Index d = -radius; d <= radius; ++d) {
        if (m + d < 0 || m + d >= n) continue;
        double const w = taps[static_cast<std::size_t>(d + radius)];
        sum += w * cur(l + d * stride);
        wsum += w;
      }
      next(l) = sum / wsum;
    }
    std::swap(cur, next);
  }
  return cur;
}

} // namespace

SsimResult ssim(Grid const& grid, RealVector const& test, RealVector const& ref, SsimOptions const& options,
                Mask const* mask) {
  if (test.size() != ref.size() || test.size() != grid.size())
    fail(ErrorKind::SizeMismatch, "ssim: image shapes differ");
  require(options.window >= 1 && options.window % 2 == 1, "ssim: window must be a positive odd size");
  require(options.sigma > 0.0, "ssim: sigma must be > 0");
  double range = ref.maxCoeff() - ref.minCoeff();
  if (range == 0.0) range = ref.cwiseAbs().maxCoeff();
  if (range == 0.0) fail(ErrorKind::InvalidArgument, "ssim: reference image is identically zero");

  std::vector<double> taps(static_cast<std::size_t>(options.window));
  Index const radius = options.window / 2;
  for (Index d = -radius; d <= radius; ++d)
    taps[static_cast<std::size_t>(d + radius)] = std::exp(-static_cast<double>(d * d) / (2.0 * options.sigma * options.sigma));

  RealVector const mx = gaussian_filter(grid, test, taps);
  RealVector const my = gaussian_filter(grid, ref, taps);
  RealVector const exx = gaussian_filter(grid, test.cwiseProduct(test), taps);
  RealVector const eyy = gaussian_filter(grid, ref.cwiseProduct(ref), taps);
  RealVector const exy = gaussian_filter(grid, test.cwiseProduct(ref), taps);

  double const c1 = (options.k1 * range) * (options.k1 * range);
  double const c2 = (options.k2 * range) * (options.k2 * range);
  SsimResult out;
  out.map.resize(test.size());
  for (Index l = 0; l < test.size(); ++l) {
    double const vx = exx(l) - mx(l) * mx(l);
    double const vy = eyy(l) - my(l) * my(l);
    double const cxy = exy(l) - mx(l) * my(l);
    out.map(l) = ((2.0 * mx(l) * my(l) + c1) * (2.0 * cxy + c2)) /
                 ((mx(l) * mx(l) + my(l) * my(l) + c1) * (vx + vy + c2));
  }
  if (mask) {
    require(mask->size() == test.size(), "ssim: mask shape differs");
    require(mask->any(), "ssim: mask is empty");
    double sum = 0.0;
    for (Index l = 0; l < test.size(); ++l)
      if ((*mask)(l)) sum += out.map(l);
    out.mean = sum / static_cast<double>(mask->count());
  } else {
    out.mean = out.map.mean();
  }
  return out;
}

SsimResult ssim(Grid const& grid, ComplexVector const& test, ComplexVector const& ref, SsimOptions const& options,
                Mask const* mask) {
  return ssim(grid, RealVector(test.cwiseAbs()), RealVector(ref.cwiseAbs()), options, mask);
}

double rmse(ComplexVector const& test, ComplexVector const& ref, Mask const* mask) {
  if (test.size() != ref.size()) fail(ErrorKind::SizeMismatch, "rmse: image shapes differ");
  double num = 0.0, den = 0.0;
  Index count = 0;
  for (Index l = 0; l < test.size(); ++l) {
    if (mask && !(*mask)(l)) continue;
    num += std::norm(test(l) - ref(l));
    den += std::norm(ref(l));
    ++count;
  }
  if (count == 0) fail(ErrorKind::InvalidArgument, "rmse: mask is empty");
  if (den == 0.0) fail(ErrorKind::InvalidArgument, "rmse: reference is zero on the mask");
  return std::sqrt(num / den);
}

double rmse(RealVector const& test, RealVector const& ref, Mask const* mask) {
  return rmse(ComplexVector(test.cast<Cx>()), ComplexVector(ref.cast<Cx>()), mask);
}

LCurveCorner lcurve_corner(std::vector<double> const& residual_norm, std::vector<double> const& solution_norm) {
  auto const n = static_cast<Index>(residual_norm.size());
  if (static_cast<Index>(solution_norm.size()) != n) fail(ErrorKind::SizeMismatch, "lcurve: norm series differ in length");
  if (n < 5) fail(ErrorKind::InvalidArgument, "lcurve: need at least 5 logged iterations");

  RealVector x(n), y(n);
  for (Index i = 0; i < n; ++i) {
    require(residual_norm[static_cast<std::size_t>(i)] > 0.0 && solution_norm[static_cast<std::size_t>(i)] > 0.0,
            "lcurve: norms must be positive");
    x(i) = std::log(residual_norm[static_cast<std::size_t>(i)]);
    y(i) = std::log(solution_norm[static_cast<std::size_t>(i)]);
  }
  auto smooth = [n](RealVector const& v) {
    RealVector out(n);
    Index const half = kLCurveSmoothing / 2;
    for (Index i = 0; i < n; ++i) {
      Index const a = std::max<Index>(0, i - half);
      Index const b = std::min<Index>(n - 1, i + half);
      out(i) = v.segment(a, b - a + 1).mean();
    }
    return out;
  };
  RealVector const xs = smooth(x);
  RealVector const ys = smooth(y);

  LCurveCorner out;
  out.curvature = RealVector::Zero(n);
  for (Index i = 1; i + 1 < n; ++i) {
    double const dx = 0.5 * (xs(i + 1) - xs(i - 1));
    double const dy = 0.5 * (ys(i + 1) - ys(i - 1));
    double const ddx = xs(i + 1) - 2.0 * xs(i) + xs(i - 1);
    double const ddy = ys(i + 1) - 2.0 * ys(i) + ys(i - 1);
    double const speed = std::hypot(dx, dy);
    if (speed == 0.0) continue;
    out.curvature(i) = std::abs(dx * ddy - dy * ddx) / (speed * speed * speed);
  }
  out.max_curvature = out.curvature.maxCoeff(&out.index);
  // Curvature times the curve's extent is scale free; below 1e-3 there is no real corner.
  double const extent = std::hypot(xs.maxCoeff() - xs.minCoeff(), ys.maxCoeff() - ys.minCoeff());
  out.low_confidence = !(out.max_curvature * extent > 1e-3);
  return out;
}

} // namespace nfsense
