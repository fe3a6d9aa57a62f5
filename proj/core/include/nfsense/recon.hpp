#pragma once

#include <functional>
#include <string>
#include <vector>

#include "nfsense/types.hpp"

namespace nfsense {

/// Element layout used when slicing the temporal basis in the split variant.
/// ColumnMajor transposes K once and takes column blocks of K^T; RowMajor
/// takes row blocks of K directly.
enum class ElementOrder { ColumnMajor, RowMajor };

ElementOrder parse_element_order(std::string const& manifest_value);

/// exp(i * k_rows * R), evaluated as one real product followed by an
/// element-wise complex exponential.
ComplexMatrix phase_block(Eigen::Ref<RealMatrix const> const& k_rows, RealMatrix const& spatial);

/// Coil signals P (S .* p 1^T) for a resident phase matrix P (K x L).
ComplexMatrix apply_E(ComplexVector const& p, ComplexMatrix const& sens, ComplexMatrix const& phase);
/// (1^T ((Sigma^H P) .* S^T))^H: E^H sigma without forming P^H.
ComplexVector apply_EH(ComplexMatrix const& sigma, ComplexMatrix const& sens, ComplexMatrix const& phase);

/// The same operators with P recomputed block by block from K and R.
/// `block_starts` are 0-based: first 0, strictly increasing, last K.
ComplexMatrix apply_E(ComplexVector const& p, ComplexMatrix const& sens, RealMatrix const& temporal,
                      RealMatrix const& spatial, std::vector<Index> const& block_starts);
ComplexVector apply_EH(ComplexMatrix const& sigma, ComplexMatrix const& sens, RealMatrix const& temporal,
                       RealMatrix const& spatial, std::vector<Index> const& block_starts);

std::vector<Index> uniform_block_starts(Index samples, Index blocks);
std::vector<Index> block_starts_for_rows(Index samples, Index rows_per_block);
void validate_block_starts(std::vector<Index> const& starts, Index samples);

/// Largest P' row count fitting `budget_bytes` (phase product plus complex block).
Index rows_for_budget(Index voxels, std::size_t budget_bytes);

struct EncodingInputs {
  RawCoilData sigma;       // K x coils
  SpatialBasis spatial;    // (P+1) x L_R, columns = reconstruction-mask voxels
  TemporalBasis temporal;  // K x (P+1)
  SensitivityMaps sens;    // L_R x coils
  RealVector intensity;    // j, length L_R
  KSpaceFilter filter;     // full grid; empty = no filtering
  Grid grid;
  Mask recon;              // full grid; true voxels enumerate the L_R unknowns in order
  Index iterations = 0;
  std::vector<Index> block_starts; // split variant only

  Index unknowns() const { return spatial.voxels(); }
  void validate(bool split) const;
};

struct TimingEntry {
  std::string label;
  double seconds;
};

struct CGLog {
  Index iterations = 0;
  std::vector<double> residual_norm; // ||r||_2 after each iteration
  std::vector<double> solution_norm; // ||rho||_2 after each iteration
  std::vector<TimingEntry> timing;
};

struct ReconOptions {
  std::size_t memory_budget_bytes = 0; // 0 = unlimited
  ElementOrder element_order = ElementOrder::ColumnMajor;
  /// Called after every CG iteration with the intensity-corrected estimate
  /// on the reconstruction-mask voxels.
  std::function<void(Index iteration, ComplexVector const& rho)> observer;
};

struct ReconResult {
  ReconImage image;
  CGLog log;
};

/// CG on the normal equations with the full phase matrix resident in memory.
ReconResult recon_full(EncodingInputs const& inputs, ReconOptions const& options = {});

/// Same iteration with P recomputed block by block once per CG iteration.
ReconResult recon_split(EncodingInputs const& inputs, ReconOptions const& options = {});

struct FieldModel {
  int order = 1;
  bool global_term = false;
};

struct Bases {
  SpatialBasis spatial;
  TemporalBasis temporal;
};

/// R = [B0; 1 (global term); h_p(r)] restricted to the reconstruction mask,
/// K = trajectory unchanged. The trajectory must carry exactly the terms of
/// `model`.
Bases build_bases(RealVector const& b0, Mask const& recon, Grid const& grid, TemporalBasis const& trajectory,
                  FieldModel const& model);

/// Drops trailing higher-order columns so an order-`from` trajectory serves
/// an order-`to` reconstruction (to <= from).
TemporalBasis truncate_field_model(TemporalBasis const& trajectory, int dimensionality, FieldModel const& from,
                                   FieldModel const& to);

} // namespace nfsense
