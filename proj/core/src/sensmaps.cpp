#include "nfsense/sensmaps.hpp"

#include <cmath>

#include <Eigen/SVD>

#include "nfsense/error.hpp"

namespace nfsense {

RawSensitivity estimate_svd(PrescanData const& prescan, Mask const& trusted) {
  prescan.validate();
  Index const L = prescan.voxels();
  Index const coils = prescan.coils();
  Index const echoes = prescan.echo_count();
  require(trusted.size() == L, "estimate_svd: trusted mask does not match prescan");

  RawSensitivity out;
  out.maps = ComplexMatrix::Zero(L, coils);
  out.flagged = Mask::Constant(L, false);
  double const scale = 1.0 / std::sqrt(static_cast<double>(echoes));

#pragma omp parallel for schedule(static)
  for (Index l = 0; l < L; ++l) {
    if (!trusted(l)) continue;
    ComplexMatrix m(coils, echoes);
    for (Index n = 0; n < echoes; ++n) m.col(n) = prescan.echoes[static_cast<std::size_t>(n)].row(l).transpose();
    if (m.squaredNorm() == 0.0) {
      out.flagged(l) = true;
      continue;
    }
    Eigen::JacobiSVD<ComplexMatrix> svd(m, Eigen::ComputeThinU);
    ComplexVector u = svd.matrixU().col(0);
    Cx const anchor = u.dot(m.col(0)); // u^H m_0
    if (std::abs(anchor) > 0.0) {
      u *= anchor / std::abs(anchor);
    } else {
      Index k;
      u.cwiseAbs().maxCoeff(&k);
      u *= std::conj(u(k)) / std::abs(u(k));
    }
    out.maps.row(l) = (u * (svd.singularValues()(0) * scale)).transpose();
  }
  return out;
}

double default_alpha_s(Grid const& grid) {
  double const h = grid.min_pitch();
  return 1e-2 * h * h * h * h;
}

MapSmoother::MapSmoother(Grid const& grid, Mask const& trusted, Mask const& recon, SmoothingOptions const& options)
    : voxels_(grid.size()), options_(options) {
  require(trusted.size() == grid.size() && recon.size() == grid.size(), "smoother: masks do not match grid");
  require(options.alpha >= 0.0, "smoother: alpha must be >= 0");
  unknowns_ = mask_indices(recon);

  std::vector<WeightedBlock> blocks;
  data_block_.op = SparseMatrix::identity(voxels_).select_columns(unknowns_);
  data_block_.weights = trusted.cast<double>().matrix();
  blocks.push_back(data_block_);
  if (options.alpha > 0.0) {
    RealVector const w = std::sqrt(options.alpha) * recon.cast<double>().matrix();
    for (int axis = 0; axis < grid.dimensionality(); ++axis)
      blocks.push_back({w, difference_operator(grid, axis, 2, recon).select_columns(unknowns_)});
  }
  normal_ = assemble_normal_equations(blocks);
  precond_ = Preconditioner::build(options.precond, normal_);
}

RealVector MapSmoother::solve_column(RealVector const& observation) {
  require(observation.size() == voxels_, "smoother: observation does not match grid");
  auto const result = pcg_solve(normal_, normal_rhs(data_block_, observation), precond_, options_.tol,
                                options_.max_iter);
  iterations_.push_back(result.iterations);
  RealVector out = RealVector::Zero(voxels_);
  for (std::size_t i = 0; i < unknowns_.size(); ++i) out(unknowns_[i]) = result.x(static_cast<Index>(i));
  return out;
}

RealMatrix MapSmoother::smooth(RealMatrix const& raw) {
  RealMatrix out(raw.rows(), raw.cols());
  for (Index c = 0; c < raw.cols(); ++c) out.col(c) = solve_column(raw.col(c));
  return out;
}

ComplexMatrix MapSmoother::smooth(ComplexMatrix const& raw) {
  ComplexMatrix out(raw.rows(), raw.cols());
  for (Index c = 0; c < raw.cols(); ++c) {
    RealVector const re = solve_column(raw.col(c).real());
    RealVector const im = solve_column(raw.col(c).imag());
    out.col(c) = re.cast<Cx>() + Cx(0.0, 1.0) * im.cast<Cx>();
  }
  return out;
}

RealMatrix smooth_extrapolate(Grid const& grid, RealMatrix const& raw, Mask const& trusted, Mask const& recon,
                              SmoothingOptions const& options) {
  MapSmoother smoother(grid, trusted, recon, options);
  return smoother.smooth(raw);
}

ComplexMatrix smooth_extrapolate(Grid const& grid, ComplexMatrix const& raw, Mask const& trusted, Mask const& recon,
                                 SmoothingOptions const& options) {
  MapSmoother smoother(grid, trusted, recon, options);
  return smoother.smooth(raw);
}

SensitivityMaps recombine(Grid const& grid, RawSensitivity const& raw, Mask const& trusted, Mask const& recon,
                          SmoothingOptions const& options) {
  Index const L = grid.size();
  require(raw.maps.rows() == L, "recombine: raw maps do not match grid");
  RealMatrix const magnitude = raw.maps.cwiseAbs();
  ComplexMatrix unit = ComplexMatrix::Zero(L, raw.maps.cols());
  for (Index c = 0; c < raw.maps.cols(); ++c)
    for (Index l = 0; l < L; ++l)
      if (magnitude(l, c) > 0.0) unit(l, c) = raw.maps(l, c) / magnitude(l, c);

  MapSmoother smoother(grid, trusted, recon, options);
  RealMatrix const smag = smoother.smooth(magnitude);
  ComplexMatrix const sunit = smoother.smooth(unit);

  SensitivityMaps out;
  out.maps = ComplexMatrix::Zero(L, raw.maps.cols());
  for (Index c = 0; c < raw.maps.cols(); ++c)
    for (Index l = 0; l < L; ++l) {
      double const u = std::abs(sunit(l, c));
      if (recon(l) && u >= 1e-12) out.maps(l, c) = smag(l, c) * (sunit(l, c) / u);
    }
  return out;
}

RealVector intensity_correction(SensitivityMaps const& maps, Mask const& recon) {
  require(maps.maps.rows() == recon.size(), "intensity correction: mask does not match maps");
  require(maps.maps.allFinite(), "intensity correction: sensitivity maps contain non-finite values");
  RealVector j = RealVector::Zero(recon.size());
  for (Index l = 0; l < recon.size(); ++l) {
    double const ss = maps.maps.row(l).squaredNorm();
    if (recon(l) && ss > 0.0) j(l) = 1.0 / std::sqrt(ss);
  }
  return j;
}

} // namespace nfsense
