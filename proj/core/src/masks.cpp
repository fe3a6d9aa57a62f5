#include "nfsense/masks.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

#include "nfsense/error.hpp"

namespace nfsense {

RealVector rss_combine(PrescanData const& prescan, Index echo) {
  require(echo >= 0 && echo < prescan.echo_count(), "echo index out of range");
  auto const& m = prescan.echoes[static_cast<std::size_t>(echo)];
  return m.rowwise().norm();
}

Mask default_rough_mask(RealVector const& mag) {
  double const peak = mag.size() ? mag.maxCoeff() : 0.0;
  return (mag.array() > 0.1 * peak);
}

namespace {

struct Monomial {
  int px, py, pz;
};

std::vector<Monomial> monomials(int degree, int dims) {
  std::vector<Monomial> out;
  for (int total = 0; total <= degree; ++total)
    for (int pz = 0; pz <= (dims > 2 ? total : 0); ++pz)
      for (int py = 0; py <= (dims > 1 ? total - pz : 0); ++py) {
        int const px = total - pz - py;
        out.push_back({px, py, pz});
      }
  return out;
}

} // namespace

BiasFit estimate_bias_field(Grid const& grid, RealVector const& mag, Mask const& rough_mask, int degree) {
  Index const L = grid.size();
  require(mag.size() == L && rough_mask.size() == L, "bias fit: input sizes do not match the grid");
  require(degree >= 0, "bias fit: degree must be >= 0");
  require((mag.array() >= 0.0).all(), "bias fit: magnitude must be non-negative");

  auto const terms = monomials(degree, grid.dimensionality());
  std::vector<Index> rows;
  for (Index l = 0; l < L; ++l)
    if (rough_mask(l) && mag(l) > 0.0) rows.push_back(l);
  auto const nterms = static_cast<Index>(terms.size());
  if (static_cast<Index>(rows.size()) < nterms)
    fail(ErrorKind::Numerical, "bias fit is degenerate: " + std::to_string(rows.size()) + " usable voxels for " +
                                   std::to_string(nterms) + " polynomial coefficients");

  // Coordinates scaled to [-1, 1] keep the Vandermonde system well conditioned.
  auto design_row = [&](Index l, Eigen::Ref<RealVector> out) {
    auto const idx = grid.unravel(l);
    double u[3];
    for (int a = 0; a < 3; ++a) {
      double const half = 0.5 * grid.fov[a];
      u[a] = grid.dims[a] > 1 ? grid.coordinate(a, idx[a]) / half : 0.0;
    }
    for (Index t = 0; t < nterms; ++t) {
      auto const& m = terms[static_cast<std::size_t>(t)];
      out(t) = std::pow(u[0], m.px) * std::pow(u[1], m.py) * std::pow(u[2], m.pz);
    }
  };

  RealMatrix design(static_cast<Index>(rows.size()), nterms);
  RealVector rhs(static_cast<Index>(rows.size()));
  RealVector row(nterms);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    design_row(rows[i], row);
    design.row(static_cast<Index>(i)) = row.transpose();
    rhs(static_cast<Index>(i)) = std::log(mag(rows[i]));
  }
  Eigen::ColPivHouseholderQR<RealMatrix> qr(design);
  if (qr.rank() < nterms) fail(ErrorKind::Numerical, "bias fit is degenerate: design matrix is rank deficient");
  RealVector const coeffs = qr.solve(rhs);

  BiasFit fit;
  fit.coefficients = nterms;
  fit.field.resize(L);
  for (Index l = 0; l < L; ++l) {
    design_row(l, row);
    fit.field(l) = std::exp(row.dot(coeffs));
  }
  double sum = 0.0;
  Index count = 0;
  for (Index l = 0; l < L; ++l)
    if (rough_mask(l)) {
      sum += fit.field(l);
      ++count;
    }
  fit.field /= sum / static_cast<double>(count);
  return fit;
}

HistogramThreshold trusted_threshold(RealVector const& mag) {
  std::vector<double> logs;
  for (Index l = 0; l < mag.size(); ++l) {
    require(mag(l) >= 0.0, "threshold: magnitude must be non-negative");
    if (mag(l) > 0.0) logs.push_back(std::log(mag(l)));
  }
  require(!logs.empty(), "threshold: no positive voxels");
  auto const [lo_it, hi_it] = std::minmax_element(logs.begin(), logs.end());
  double const lo = *lo_it;
  double const hi = *hi_it;
  if (!(hi > lo))
    fail(ErrorKind::Numerical, "histogram is unimodal (all voxels equal); pass an explicit --threshold");

  HistogramThreshold out;
  out.log_min = lo;
  out.bin_width = (hi - lo) / kThresholdBins;
  RealVector raw = RealVector::Zero(kThresholdBins);
  for (double v : logs) {
    auto bin = static_cast<Index>((v - lo) / out.bin_width);
    raw(std::clamp<Index>(bin, 0, kThresholdBins - 1)) += 1.0;
  }
  // Moving average, window truncated at the ends.
  out.counts.resize(kThresholdBins);
  Index const half = kThresholdSmoothing / 2;
  for (Index i = 0; i < kThresholdBins; ++i) {
    Index const a = std::max<Index>(0, i - half);
    Index const b = std::min<Index>(kThresholdBins - 1, i + half);
    out.counts(i) = raw.segment(a, b - a + 1).sum() / static_cast<double>(b - a + 1);
  }

  // Peaks are plateaus strictly higher than both neighbours (or the edge).
  auto const& h = out.counts;
  struct Peak {
    Index centre;
    double height;
  };
  std::vector<Peak> peaks;
  for (Index i = 0; i < kThresholdBins;) {
    Index j = i;
    while (j + 1 < kThresholdBins && h(j + 1) == h(i)) ++j;
    bool const left_lower = i == 0 || h(i - 1) < h(i);
    bool const right_lower = j == kThresholdBins - 1 || h(j + 1) < h(i);
    if (left_lower && right_lower && h(i) > 0.0) peaks.push_back({(i + j) / 2, h(i)});
    i = j + 1;
  }
  if (peaks.size() < 2)
    fail(ErrorKind::Numerical, "histogram is unimodal (no interior minimum); pass an explicit --threshold");
  std::stable_sort(peaks.begin(), peaks.end(), [](Peak const& a, Peak const& b) { return a.height > b.height; });
  Index const a = std::min(peaks[0].centre, peaks[1].centre);
  Index const b = std::max(peaks[0].centre, peaks[1].centre);
  Index best = a + 1;
  for (Index i = a + 1; i < b; ++i)
    if (h(i) < h(best)) best = i;
  if (best >= b || h(best) >= std::min(peaks[0].height, peaks[1].height))
    fail(ErrorKind::Numerical, "histogram has no valley between its two highest peaks; pass an explicit --threshold");
  out.threshold = std::exp(lo + (static_cast<double>(best) + 0.5) * out.bin_width);
  return out;
}

namespace {

template <typename Visit>
void for_neighbours(Grid const& grid, Index l, bool full, Visit&& visit) {
  auto const idx = grid.unravel(l);
  int const dims = grid.dimensionality();
  int const zr = dims > 2 ? 1 : 0;
  int const yr = dims > 1 ? 1 : 0;
  for (int dz = -zr; dz <= zr; ++dz)
    for (int dy = -yr; dy <= yr; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        int const manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (manhattan == 0 || (!full && manhattan != 1)) continue;
        Index const x = idx[0] + dx, y = idx[1] + dy, z = idx[2] + dz;
        if (x < 0 || y < 0 || z < 0 || x >= grid.dims[0] || y >= grid.dims[1] || z >= grid.dims[2]) {
          visit(Index{-1});
          continue;
        }
        visit(grid.linear(x, y, z));
      }
}

// Labels connected components; returns label per voxel (-1 = background).
std::vector<Index> label_components(Grid const& grid, Mask const& mask, bool full, std::vector<Index>& sizes,
                                    std::vector<bool>* touches_border = nullptr) {
  std::vector<Index> label(static_cast<std::size_t>(mask.size()), -1);
  std::deque<Index> queue;
  for (Index s = 0; s < mask.size(); ++s) {
    if (!mask(s) || label[static_cast<std::size_t>(s)] >= 0) continue;
    Index const id = static_cast<Index>(sizes.size());
    sizes.push_back(0);
    if (touches_border) touches_border->push_back(false);
    label[static_cast<std::size_t>(s)] = id;
    queue.push_back(s);
    while (!queue.empty()) {
      Index const l = queue.front();
      queue.pop_front();
      ++sizes.back();
      for_neighbours(grid, l, full, [&](Index n) {
        if (n < 0) {
          if (touches_border) touches_border->back() = true;
          return;
        }
        if (mask(n) && label[static_cast<std::size_t>(n)] < 0) {
          label[static_cast<std::size_t>(n)] = id;
          queue.push_back(n);
        }
      });
    }
  }
  return label;
}

} // namespace

Mask largest_component(Grid const& grid, Mask const& mask) {
  require(mask.size() == grid.size(), "mask does not match grid");
  std::vector<Index> sizes;
  auto const label = label_components(grid, mask, true, sizes);
  Mask out = Mask::Constant(mask.size(), false);
  if (sizes.empty()) return out;
  auto const keep = static_cast<Index>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  for (Index l = 0; l < mask.size(); ++l) out(l) = label[static_cast<std::size_t>(l)] == keep;
  return out;
}

Mask fill_holes(Grid const& grid, Mask const& mask) {
  require(mask.size() == grid.size(), "mask does not match grid");
  Mask const background = !mask;
  std::vector<Index> sizes;
  std::vector<bool> border;
  auto const label = label_components(grid, background, false, sizes, &border);
  Mask out = mask;
  for (Index l = 0; l < mask.size(); ++l) {
    Index const id = label[static_cast<std::size_t>(l)];
    if (id >= 0 && !border[static_cast<std::size_t>(id)]) out(l) = true;
  }
  return out;
}

Mask dilate(Grid const& grid, Mask const& mask, Index radius) {
  require(mask.size() == grid.size(), "mask does not match grid");
  require(radius >= 0, "dilation radius must be >= 0");
  if (radius == 0) return mask;
  int const dims = grid.dimensionality();
  Index const ry = dims > 1 ? radius : 0;
  Index const rz = dims > 2 ? radius : 0;
  std::vector<std::array<Index, 3>> ball;
  for (Index dz = -rz; dz <= rz; ++dz)
    for (Index dy = -ry; dy <= ry; ++dy)
      for (Index dx = -radius; dx <= radius; ++dx)
        if (dx * dx + dy * dy + dz * dz <= radius * radius) ball.push_back({dx, dy, dz});
  Mask out = Mask::Constant(mask.size(), false);
  for (Index l = 0; l < mask.size(); ++l) {
    if (!mask(l)) continue;
    auto const idx = grid.unravel(l);
    for (auto const& d : ball) {
      Index const x = idx[0] + d[0], y = idx[1] + d[1], z = idx[2] + d[2];
      if (x < 0 || y < 0 || z < 0 || x >= grid.dims[0] || y >= grid.dims[1] || z >= grid.dims[2]) continue;
      out(grid.linear(x, y, z)) = true;
    }
  }
  return out;
}

MaskPair compute_masks(Grid const& grid, RealVector const& mag, double threshold, Index dilation_radius) {
  require(mag.size() == grid.size(), "magnitude does not match grid");
  require(threshold > 0.0, "mask threshold must be > 0");
  MaskPair out;
  out.trusted = mag.array() > threshold;
  if (!out.trusted.any()) fail(ErrorKind::Numerical, "trusted mask is empty at threshold " + std::to_string(threshold));
  out.recon = dilate(grid, fill_holes(grid, largest_component(grid, out.trusted)), dilation_radius);
  return out;
}

} // namespace nfsense
