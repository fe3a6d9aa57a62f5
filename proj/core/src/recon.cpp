#include "nfsense/recon.hpp"

#include <chrono>
#include <cmath>

#include "nfsense/error.hpp"
#include "nfsense/harmonics.hpp"
#include "nfsense/kfilter.hpp"

namespace nfsense {

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Stopwatch {
 public:
  double lap() {
    auto const now = std::chrono::steady_clock::now();
    double const s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

// Element-wise exp(i * phi) over the real phase product, written into `out`.
template <typename Derived>
void phase_block_into(Eigen::MatrixBase<Derived> const& k_rows, RealMatrix const& spatial, RealMatrix& phi,
                      ComplexMatrix& out) {
  phi.noalias() = k_rows * spatial;
  out.resize(phi.rows(), phi.cols());
  Index const n = phi.size();
  double const* src = phi.data();
  Cx* dst = out.data();
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) dst[i] = Cx(std::cos(src[i]), std::sin(src[i]));
}

// conj(sum over coils of A(c, l) * S(l, c)) for A coils x L and S L x coils.
ComplexVector reduce_coils(ComplexMatrix const& a, ComplexMatrix const& sens) {
  return (a.transpose().array() * sens.array()).rowwise().sum().conjugate().matrix();
}

ComplexMatrix weight_coils(ComplexMatrix const& sens, ComplexVector const& p) {
  return (sens.array().colwise() * p.array()).matrix();
}

std::size_t phase_bytes(Index rows, Index voxels) {
  return static_cast<std::size_t>(rows) * static_cast<std::size_t>(voxels) * (sizeof(Cx) + sizeof(double));
}

void check_iterate(double alpha, double beta) {
  if (!std::isfinite(alpha) || !std::isfinite(beta) || beta <= 0.0)
    fail(ErrorKind::Numerical, "CG produced a non-finite or non-positive curvature (p^H E^H E p = " +
                                   std::to_string(beta) + ")");
}

ReconImage finalize(EncodingInputs const& in, ComplexVector const& rho) {
  ReconImage out;
  out.grid = in.grid;
  out.values = ComplexVector::Zero(in.grid.size());
  Index k = 0;
  for (Index l = 0; l < in.recon.size(); ++l)
    if (in.recon(l)) out.values(l) = rho(k++);
  if (in.filter.mask.size() > 0) out.values = apply_filter(out.values, in.grid, in.filter);
  return out;
}

// The CG recurrence shared by both variants. `normal` maps p to E^H E p.
template <typename Normal>
ComplexVector conjugate_gradient(EncodingInputs const& in, ReconOptions const& options, ComplexVector p,
                                 Normal&& normal, CGLog& log, std::string const& label, Stopwatch& watch) {
  ComplexVector r = p;
  ComplexVector rho = ComplexVector::Zero(p.size());
  double alpha = r.squaredNorm();
  for (Index n = 1; n <= in.iterations; ++n) {
    if (alpha == 0.0) break; // exact solution reached, further updates are 0/0
    ComplexVector const q = normal(p);
    double const beta = p.dot(q).real();
    check_iterate(alpha, beta);
    rho += (alpha / beta) * p;
    r -= (alpha / beta) * q;
    double const previous = alpha;
    alpha = r.squaredNorm();
    p = r + (alpha / previous) * p;

    ++log.iterations;
    log.residual_norm.push_back(std::sqrt(alpha));
    log.solution_norm.push_back(rho.norm());
    log.timing.push_back({label + " " + std::to_string(n), watch.lap()});
    if (options.observer) options.observer(n, rho.cwiseProduct(in.intensity.cast<Cx>()));
  }
  return rho;
}

} // namespace

ElementOrder parse_element_order(std::string const& value) {
  if (value == "x-fastest" || value == "column-major") return ElementOrder::ColumnMajor;
  if (value == "row-major") return ElementOrder::RowMajor;
  fail(ErrorKind::InvalidArgument, "unknown element order '" + value + "'");
}

ComplexMatrix phase_block(Eigen::Ref<RealMatrix const> const& k_rows, RealMatrix const& spatial) {
  require(k_rows.cols() == spatial.rows(), "phase_block: temporal and spatial term counts differ");
  RealMatrix phi;
  ComplexMatrix out;
  phase_block_into(k_rows, spatial, phi, out);
  return out;
}

ComplexMatrix apply_E(ComplexVector const& p, ComplexMatrix const& sens, ComplexMatrix const& phase) {
  require(p.size() == sens.rows() && phase.cols() == sens.rows(), "apply_E: dimension mismatch");
  return phase * weight_coils(sens, p);
}

ComplexVector apply_EH(ComplexMatrix const& sigma, ComplexMatrix const& sens, ComplexMatrix const& phase) {
  require(sigma.rows() == phase.rows() && sigma.cols() == sens.cols() && phase.cols() == sens.rows(),
          "apply_EH: dimension mismatch");
  return reduce_coils(sigma.adjoint() * phase, sens);
}

ComplexMatrix apply_E(ComplexVector const& p, ComplexMatrix const& sens, RealMatrix const& temporal,
                      RealMatrix const& spatial, std::vector<Index> const& block_starts) {
  require(p.size() == sens.rows() && spatial.cols() == sens.rows() && temporal.cols() == spatial.rows(),
          "apply_E: dimension mismatch");
  validate_block_starts(block_starts, temporal.rows());
  ComplexMatrix const q = weight_coils(sens, p);
  ComplexMatrix out(temporal.rows(), sens.cols());
  RealMatrix phi;
  ComplexMatrix block;
  for (std::size_t m = 0; m + 1 < block_starts.size(); ++m) {
    Index const a = block_starts[m];
    Index const n = block_starts[m + 1] - a;
    phase_block_into(temporal.middleRows(a, n), spatial, phi, block);
    out.middleRows(a, n).noalias() = block * q;
  }
  return out;
}

ComplexVector apply_EH(ComplexMatrix const& sigma, ComplexMatrix const& sens, RealMatrix const& temporal,
                       RealMatrix const& spatial, std::vector<Index> const& block_starts) {
  require(sigma.rows() == temporal.rows() && sigma.cols() == sens.cols() && spatial.cols() == sens.rows() &&
              temporal.cols() == spatial.rows(),
          "apply_EH: dimension mismatch");
  validate_block_starts(block_starts, temporal.rows());
  ComplexMatrix const sigma_h = sigma.adjoint();
  ComplexMatrix acc = ComplexMatrix::Zero(sens.cols(), sens.rows());
  RealMatrix phi;
  ComplexMatrix block;
  for (std::size_t m = 0; m + 1 < block_starts.size(); ++m) {
    Index const a = block_starts[m];
    Index const n = block_starts[m + 1] - a;
    phase_block_into(temporal.middleRows(a, n), spatial, phi, block);
    acc.noalias() += sigma_h.middleCols(a, n) * block;
  }
  return reduce_coils(acc, sens);
}

std::vector<Index> uniform_block_starts(Index samples, Index blocks) {
  require(samples >= 1, "block partition needs at least one sample");
  require(blocks >= 1 && blocks <= samples, "block count must lie in [1, K]");
  std::vector<Index> starts;
  for (Index b = 0; b <= blocks; ++b) starts.push_back(b * samples / blocks);
  return starts;
}

std::vector<Index> block_starts_for_rows(Index samples, Index rows_per_block) {
  require(rows_per_block >= 1, "block size must be >= 1");
  std::vector<Index> starts;
  for (Index a = 0; a < samples; a += rows_per_block) starts.push_back(a);
  starts.push_back(samples);
  return starts;
}

void validate_block_starts(std::vector<Index> const& starts, Index samples) {
  if (starts.size() < 2 || starts.front() != 0 || starts.back() != samples)
    fail(ErrorKind::InvalidArgument, "block starts must begin at 0 and end at K = " + std::to_string(samples));
  for (std::size_t i = 1; i < starts.size(); ++i)
    if (starts[i] <= starts[i - 1]) fail(ErrorKind::InvalidArgument, "block starts must be strictly increasing");
}

Index rows_for_budget(Index voxels, std::size_t budget_bytes) {
  std::size_t const per_row = phase_bytes(1, voxels);
  return static_cast<Index>(budget_bytes / per_row);
}

void EncodingInputs::validate(bool split) const {
  Index const K = sigma.samples_count();
  Index const L = spatial.voxels();
  sigma.validate();
  temporal.validate();
  spatial.validate();
  require(temporal.samples_count() == K, "temporal basis has " + std::to_string(temporal.samples_count()) +
                                             " rows but the raw data has K = " + std::to_string(K));
  require(temporal.terms() == spatial.terms(), "temporal and spatial bases disagree on P+1");
  require(sens.voxels() == L && sens.coils() == sigma.coils(), "sensitivity maps must be L_R x coils");
  require(intensity.size() == L, "intensity correction must have one entry per unknown");
  require(recon.size() == grid.size() && recon.count() == L, "reconstruction mask does not enumerate the unknowns");
  require(filter.mask.size() == 0 || filter.mask.size() == grid.size(), "k-space filter does not match the grid");
  require(iterations >= 0, "iteration count must be >= 0");
  if (split) validate_block_starts(block_starts, K);
}

ReconResult recon_full(EncodingInputs const& in, ReconOptions const& options) {
  in.validate(false);
  Index const K = in.sigma.samples_count();
  Index const L = in.unknowns();
  if (options.memory_budget_bytes > 0 && phase_bytes(K, L) > options.memory_budget_bytes)
    fail(ErrorKind::MemoryBudget, "full phase matrix needs " + std::to_string(phase_bytes(K, L)) +
                                      " bytes, over the budget of " + std::to_string(options.memory_budget_bytes) +
                                      "; use the split variant (--split-block)");

  ReconResult result;
  auto& log = result.log;
  Stopwatch watch;

  ComplexMatrix const sens = (in.sens.maps.array().colwise() * in.intensity.cast<Cx>().array()).matrix();
  log.timing.push_back({"L1 intensity correction", watch.lap()});

  RealMatrix phi;
  ComplexMatrix phase;
  phase_block_into(in.temporal.matrix, in.spatial.matrix, phi, phase);
  phi.resize(0, 0);
  log.timing.push_back({"L2 init P", watch.lap()});

  ComplexVector p = reduce_coils(in.sigma.samples.adjoint() * phase, sens);
  log.timing.push_back({"L3 E^H sigma", watch.lap()});

  ComplexMatrix y;
  auto normal = [&](ComplexVector const& v) {
    y.noalias() = phase * weight_coils(sens, v);
    return reduce_coils(y.adjoint() * phase, sens);
  };
  ComplexVector rho = conjugate_gradient(in, options, std::move(p), normal, log, "L8-16 CG iteration", watch);

  result.image = finalize(in, rho.cwiseProduct(in.intensity.cast<Cx>()));
  result.image.iterations = log.iterations;
  result.image.residual_norm = log.residual_norm.empty() ? 0.0 : log.residual_norm.back();
  result.image.solution_norm = log.solution_norm.empty() ? 0.0 : log.solution_norm.back();
  log.timing.push_back({"L18-19 finalize and k-space filter", watch.lap()});
  return result;
}

ReconResult recon_split(EncodingInputs const& in, ReconOptions const& options) {
  in.validate(true);
  Index const L = in.unknowns();
  auto const& starts = in.block_starts;
  if (options.memory_budget_bytes > 0) {
    for (std::size_t m = 0; m + 1 < starts.size(); ++m)
      if (phase_bytes(starts[m + 1] - starts[m], L) > options.memory_budget_bytes)
        fail(ErrorKind::MemoryBudget, "phase block of " + std::to_string(starts[m + 1] - starts[m]) +
                                          " rows exceeds the memory budget; use smaller blocks");
  }

  ReconResult result;
  auto& log = result.log;
  Stopwatch watch;
  Index const coils = in.sigma.coils();

  ComplexMatrix const sens = (in.sens.maps.array().colwise() * in.intensity.cast<Cx>().array()).matrix();
  log.timing.push_back({"L1 intensity correction", watch.lap()});

  // Column-major storage indexes columns of K^T; row-major storage indexes rows of K.
  RealMatrix const k_transposed =
      options.element_order == ElementOrder::ColumnMajor ? RealMatrix(in.temporal.matrix.transpose()) : RealMatrix();
  RowMajorMatrix const k_rows =
      options.element_order == ElementOrder::RowMajor ? RowMajorMatrix(in.temporal.matrix) : RowMajorMatrix();
  RealMatrix phi;
  ComplexMatrix block;
  auto compute_block = [&](std::size_t m) {
    Index const a = starts[m];
    Index const n = starts[m + 1] - a;
    if (options.element_order == ElementOrder::ColumnMajor)
      phase_block_into(k_transposed.middleCols(a, n).transpose(), in.spatial.matrix, phi, block);
    else
      phase_block_into(k_rows.middleRows(a, n), in.spatial.matrix, phi, block);
    return std::pair{a, n};
  };

  ComplexMatrix const sigma_h = in.sigma.samples.adjoint();
  ComplexMatrix acc = ComplexMatrix::Zero(coils, L);
  for (std::size_t m = 0; m + 1 < starts.size(); ++m) {
    auto const [a, n] = compute_block(m);
    acc.noalias() += sigma_h.middleCols(a, n) * block;
  }
  ComplexVector p = reduce_coils(acc, sens);
  log.timing.push_back({"L2-11 E^H sigma (blockwise P)", watch.lap()});

  ComplexMatrix y;
  auto normal = [&](ComplexVector const& v) {
    ComplexMatrix const q = weight_coils(sens, v);
    acc.setZero();
    for (std::size_t m = 0; m + 1 < starts.size(); ++m) {
      compute_block(m);
      y.noalias() = block * q;
      acc.noalias() += y.adjoint() * block;
    }
    return reduce_coils(acc, sens);
  };
  ComplexVector rho = conjugate_gradient(in, options, std::move(p), normal, log, "L15-33 CG iteration", watch);

  result.image = finalize(in, rho.cwiseProduct(in.intensity.cast<Cx>()));
  result.image.iterations = log.iterations;
  result.image.residual_norm = log.residual_norm.empty() ? 0.0 : log.residual_norm.back();
  result.image.solution_norm = log.solution_norm.empty() ? 0.0 : log.solution_norm.back();
  log.timing.push_back({"L35-36 finalize and k-space filter", watch.lap()});
  return result;
}

Bases build_bases(RealVector const& b0, Mask const& recon, Grid const& grid, TemporalBasis const& trajectory,
                  FieldModel const& model) {
  require(b0.size() == grid.size() && recon.size() == grid.size(), "build_bases: maps do not match grid");
  int const dims = grid.dimensionality();
  Index const terms = field_term_count(model.order, dims, model.global_term);
  if (trajectory.terms() != terms + 1)
    fail(ErrorKind::SizeMismatch, "trajectory carries " + std::to_string(trajectory.terms() - 1) +
                                      " field terms but order " + std::to_string(model.order) +
                                      (model.global_term ? " with global term" : "") + " needs " +
                                      std::to_string(terms));
  auto const voxels = mask_indices(recon);
  RealMatrix coords(static_cast<Index>(voxels.size()), 3);
  RealMatrix const all = grid_coordinates(grid);
  for (std::size_t i = 0; i < voxels.size(); ++i) coords.row(static_cast<Index>(i)) = all.row(voxels[i]);
  RealMatrix const harmonics = solid_harmonics(model.order, coords, dims);

  Bases out;
  out.spatial.matrix.resize(terms + 1, static_cast<Index>(voxels.size()));
  Index row = 0;
  for (std::size_t i = 0; i < voxels.size(); ++i) out.spatial.matrix(row, static_cast<Index>(i)) = b0(voxels[i]);
  ++row;
  if (model.global_term) out.spatial.matrix.row(row++).setOnes();
  out.spatial.matrix.bottomRows(harmonics.rows()) = harmonics;
  out.temporal = trajectory;
  return out;
}

TemporalBasis truncate_field_model(TemporalBasis const& trajectory, int dimensionality, FieldModel const& from,
                                   FieldModel const& to) {
  require(to.order <= from.order, "cannot raise the field-model order of a trajectory");
  require(!to.global_term || from.global_term, "trajectory has no global field term");
  Index const have = field_term_count(from.order, dimensionality, from.global_term);
  if (trajectory.terms() != have + 1)
    fail(ErrorKind::SizeMismatch, "trajectory column count does not match its declared field model");
  Index const keep_harmonics = field_term_count(to.order, dimensionality, false);
  TemporalBasis out;
  out.matrix.resize(trajectory.samples_count(), 1 + (to.global_term ? 1 : 0) + keep_harmonics);
  Index col = 0;
  out.matrix.col(col++) = trajectory.matrix.col(0);
  Index src = 1;
  if (from.global_term) {
    if (to.global_term) out.matrix.col(col++) = trajectory.matrix.col(src);
    ++src;
  }
  out.matrix.rightCols(keep_harmonics) = trajectory.matrix.middleCols(src, keep_harmonics);
  return out;
}

} // namespace nfsense
