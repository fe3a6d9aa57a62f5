#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "nfsense/dataset.hpp"
#include "nfsense/recon.hpp"
#include "nfsense/sparse.hpp"

// Pipeline stages operating on a dataset directory. Each reads its inputs
// from the dataset and writes its outputs back, updating the manifest.
namespace nfsense::stages {

struct MaskOptions {
  int bias_degree = 3;
  Index dilate = 2;
  std::optional<double> threshold;
  Index echo = 0;
  bool write_bias = false;
};

struct SensOptions {
  std::optional<double> alpha;
  PreconditionerKind precond = PreconditionerKind::IncompleteCholesky;
  double tol = 1e-8;
};

struct B0Options {
  std::optional<double> alpha;
  PreconditionerKind precond = PreconditionerKind::IncompleteCholesky;
  double tol = 1e-8;
};

struct FilterOptions {
  Index dilate = 0;
  bool per_slice = false;
  bool conjugate_trajectory = false;
};

struct ReconStageOptions {
  Index iterations = 30;
  std::string split_block = "auto"; // rows | auto | full
  std::optional<int> order;
  bool conjugate_trajectory = false;
  bool use_filter = true;
  std::size_t memory_budget = 0; // 0 = half of the available memory
  std::string log_csv;
  std::string timing_csv;
};

struct StageReport {
  std::string summary; // one human-readable line
};

StageReport run_masks(Dataset& ds, MaskOptions const& o);
StageReport run_sensmaps(Dataset& ds, SensOptions const& o);
StageReport run_b0map(Dataset& ds, B0Options const& o);
StageReport run_kfilter(Dataset& ds, FilterOptions const& o);
StageReport run_recon(Dataset& ds, ReconStageOptions const& o);

/// First-order k columns (K x d) of a stored trajectory.
RealMatrix first_order_k(DatasetManifest const& m, RealMatrix const& ktemporal);

void write_cg_log(std::string const& path, CGLog const& log);
void write_timing(std::string const& path, CGLog const& log);

struct LogSeries {
  std::vector<Index> iteration;
  std::vector<double> residual_norm;
  std::vector<double> solution_norm;
};
LogSeries read_cg_log(std::string const& path);

} // namespace nfsense::stages
