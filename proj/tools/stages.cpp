#include "stages.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "nfsense/b0map.hpp"
#include "nfsense/error.hpp"
#include "nfsense/harmonics.hpp"
#include "nfsense/kfilter.hpp"
#include "nfsense/masks.hpp"
#include "nfsense/parallel.hpp"
#include "nfsense/sensmaps.hpp"

namespace nfsense::stages {

namespace {

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

std::ofstream open_csv(std::string const& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write '" + path + "'");
  out << std::setprecision(17);
  return out;
}

ComplexMatrix select_rows(ComplexMatrix const& m, std::vector<Index> const& rows) {
  ComplexMatrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

} // namespace

RealMatrix first_order_k(DatasetManifest const& m, RealMatrix const& ktemporal) {
  int const dims = m.grid.dimensionality();
  Index const first = 1 + (m.global_term ? 1 : 0);
  Index const count = field_term_count(1, dims, false);
  if (ktemporal.cols() < first + count)
    fail(ErrorKind::SizeMismatch, "ktemporal has too few columns for the first-order field terms");
  return ktemporal.middleCols(first, count);
}

StageReport run_masks(Dataset& ds, MaskOptions const& o) {
  Grid const grid = ds.manifest().grid;
  PrescanData const prescan = ds.read_prescan();
  RealVector const mag = rss_combine(prescan, o.echo);
  BiasFit const bias = estimate_bias_field(grid, mag, default_rough_mask(mag), o.bias_degree);
  RealVector const corrected = mag.cwiseQuotient(bias.field);
  double const threshold = o.threshold ? *o.threshold : trusted_threshold(corrected).threshold;
  MaskPair const masks = compute_masks(grid, corrected, threshold, o.dilate);
  ds.write_mask("mask_t", masks.trusted);
  ds.write_mask("mask_r", masks.recon);
  if (o.write_bias) ds.write_real("bias", bias.field);
  return {"threshold " + fmt(threshold) + ", |M_T| = " + std::to_string(masks.trusted.count()) +
          ", |M_R| = " + std::to_string(masks.recon.count())};
}

StageReport run_sensmaps(Dataset& ds, SensOptions const& o) {
  Grid const grid = ds.manifest().grid;
  PrescanData const prescan = ds.read_prescan();
  Mask const trusted = ds.read_mask("mask_t");
  Mask const recon = ds.read_mask("mask_r");
  RawSensitivity const raw = estimate_svd(prescan, trusted);
  SmoothingOptions opts;
  opts.alpha = o.alpha ? *o.alpha : default_alpha_s(grid);
  opts.precond = o.precond;
  opts.tol = o.tol;
  SensitivityMaps const maps = recombine(grid, raw, trusted, recon, opts);
  ds.write_complex("sens", maps.maps);
  return {"alpha_s " + fmt(opts.alpha) + ", " + std::to_string(raw.flagged.count()) + " flagged voxels"};
}

StageReport run_b0map(Dataset& ds, B0Options const& o) {
  Grid const grid = ds.manifest().grid;
  PrescanData const prescan = ds.read_prescan();
  SensitivityMaps maps;
  maps.maps = ds.read_complex("sens");
  double const dte = prescan.echo_spacing();
  FieldMap const raw = fit_phase_evolution(unwrap_temporal(relative_phases(coil_combine(prescan, maps))), dte);
  B0SmoothingOptions opts;
  opts.alpha = o.alpha ? *o.alpha : default_alpha_b(grid, raw);
  opts.precond = o.precond;
  opts.tol = o.tol;
  B0Smoothing const smooth = smooth_b0(grid, raw, opts);
  ds.write_real("b0", smooth.b0);
  ds.write_real("b0_stderr", raw.std_error);
  ds.write_real("b0_beta", raw.beta);
  Index const near = count_near_nyquist(raw, dte);
  std::string summary = "alpha_b " + fmt(opts.alpha) + ", " + std::to_string(smooth.iterations) + " PCG iterations";
  if (near > 0) summary += "; warning: " + std::to_string(near) + " voxels near the temporal unwrapping limit";
  return {summary};
}

StageReport run_kfilter(Dataset& ds, FilterOptions const& o) {
  DatasetManifest const& m = ds.manifest();
  RealMatrix k = first_order_k(m, ds.read_real("ktemporal"));
  if (o.conjugate_trajectory) k = -k;
  KSpaceFilter filter = build_filter(k, m.grid, o.per_slice);
  if (o.dilate > 0) filter = dilate_filter(filter, m.grid, o.dilate);
  ds.write_real("kfilter", filter.mask);
  return {std::to_string(static_cast<Index>(filter.mask.sum())) + " of " + std::to_string(filter.mask.size()) +
          " grid points pass"};
}

StageReport run_recon(Dataset& ds, ReconStageOptions const& o) {
  DatasetManifest const& m = ds.manifest();
  Grid const grid = m.grid;
  FieldModel const stored{m.harmonic_order, m.global_term};
  FieldModel const wanted{o.order.value_or(stored.order), stored.global_term};
  TemporalBasis trajectory;
  trajectory.matrix = ds.read_real("ktemporal");
  trajectory.validate();
  if (wanted.order != stored.order)
    trajectory = truncate_field_model(trajectory, grid.dimensionality(), stored, wanted);

  Mask const recon = ds.read_mask("mask_r");
  RealVector const b0 = ds.read_real("b0");
  Bases bases = build_bases(b0, recon, grid, trajectory, wanted);
  // exp(-i K R) data: conjugating every phase is the same as negating R.
  if (o.conjugate_trajectory) bases.spatial.matrix = -bases.spatial.matrix;

  auto const voxels = mask_indices(recon);
  SensitivityMaps full;
  full.maps = ds.read_complex("sens");
  RealVector const j_full = intensity_correction(full, recon);

  EncodingInputs in;
  in.sigma.samples = ds.read_complex("sigma");
  in.spatial = bases.spatial;
  in.temporal = bases.temporal;
  in.sens.maps = select_rows(full.maps, voxels);
  in.intensity.resize(static_cast<Index>(voxels.size()));
  for (std::size_t i = 0; i < voxels.size(); ++i) in.intensity(static_cast<Index>(i)) = j_full(voxels[i]);
  if (o.use_filter && ds.has("kfilter")) in.filter.mask = ds.read_real("kfilter");
  in.grid = grid;
  in.recon = recon;
  in.iterations = o.iterations;

  ReconOptions ro;
  ro.memory_budget_bytes = o.memory_budget != 0 ? o.memory_budget : available_memory_bytes() / 2;
  ro.element_order = parse_element_order(m.element_order);

  Index const K = in.temporal.samples_count();
  Index const LR = in.unknowns();
  ReconResult result;
  std::string variant;
  if (o.split_block == "full") {
    result = recon_full(in, ro);
    variant = "full";
  } else {
    Index rows = 0;
    if (o.split_block == "auto") {
      rows = ro.memory_budget_bytes == 0 ? K : rows_for_budget(LR, ro.memory_budget_bytes);
      if (rows == 0) fail(ErrorKind::MemoryBudget, "memory budget too small for a single row of the phase matrix");
    } else {
      std::size_t used = 0;
      long long v = 0;
      try {
        v = std::stoll(o.split_block, &used);
      } catch (std::exception const&) {
        used = 0;
      }
      if (used != o.split_block.size() || v < 1)
        fail(ErrorKind::InvalidArgument, "--split-block must be a positive row count, 'auto' or 'full'");
      rows = static_cast<Index>(v);
    }
    if (rows >= K) {
      result = recon_full(in, ro);
      variant = "full";
    } else {
      in.block_starts = block_starts_for_rows(K, rows);
      result = recon_split(in, ro);
      variant = "split, " + std::to_string(in.block_starts.size() - 1) + " blocks";
    }
  }
  ds.write_complex("rho", result.image.values);
  if (!o.log_csv.empty()) write_cg_log(o.log_csv, result.log);
  if (!o.timing_csv.empty()) write_timing(o.timing_csv, result.log);
  return {variant + ", " + std::to_string(result.log.iterations) + " iterations, |r| = " +
          fmt(result.image.residual_norm)};
}

void write_cg_log(std::string const& path, CGLog const& log) {
  auto out = open_csv(path);
  out << "# nfsense cg-log v1\n";
  out << "iter,res_norm,sol_norm\n";
  for (std::size_t i = 0; i < log.residual_norm.size(); ++i)
    out << (i + 1) << ',' << log.residual_norm[i] << ',' << log.solution_norm[i] << '\n';
}

void write_timing(std::string const& path, CGLog const& log) {
  auto out = open_csv(path);
  out << "# nfsense timing v1\n";
  out << "phase_label,seconds\n";
  for (auto const& t : log.timing) out << '"' << t.label << "\"," << t.seconds << '\n';
}

LogSeries read_cg_log(std::string const& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::MissingFile, "cannot open log '" + path + "'");
  LogSeries out;
  std::string line;
  bool header = false;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line.rfind("iter,", 0) != 0) fail(ErrorKind::InvalidArgument, "log '" + path + "' lacks the iter header");
      header = true;
      continue;
    }
    std::stringstream s(line);
    std::string a, b, c;
    if (!std::getline(s, a, ',') || !std::getline(s, b, ',') || !std::getline(s, c, ','))
      fail(ErrorKind::InvalidArgument, "log line " + std::to_string(number) + " is malformed");
    try {
      out.iteration.push_back(std::stoll(a));
      out.residual_norm.push_back(std::stod(b));
      out.solution_norm.push_back(std::stod(c));
    } catch (std::exception const&) {
      fail(ErrorKind::InvalidArgument, "log line " + std::to_string(number) + " is malformed");
    }
  }
  return out;
}

} // namespace nfsense::stages
