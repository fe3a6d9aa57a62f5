#pragma once

#include <span>
#include <string>
#include <vector>

#include "nfsense/types.hpp"

namespace nfsense {

struct Triplet {
  Index row;
  Index col;
  double value;
};

/// Real sparse matrix in compressed-row form. Column indices within a row are
/// sorted and unique.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(Index rows, Index cols);

  /// Duplicates are summed in insertion order; explicit zeros are kept.
  static SparseMatrix from_triplets(Index rows, Index cols, std::vector<Triplet> triplets);
  static SparseMatrix identity(Index n);
  static SparseMatrix diagonal(RealVector const& d);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index nonzeros() const { return static_cast<Index>(values_.size()); }

  std::span<Index const> row_columns(Index r) const;
  std::span<double const> row_values(Index r) const;

  double coeff(Index r, Index c) const;
  RealVector diagonal() const;
  SparseMatrix transpose() const;
  RealMatrix to_dense() const;

  void multiply(RealVector const& x, RealVector& y) const;
  RealVector operator*(RealVector const& x) const;

  /// Keeps only the listed columns, renumbered in list order.
  SparseMatrix select_columns(std::span<Index const> keep) const;
  /// Scales row r by w(r).
  SparseMatrix scale_rows(RealVector const& w) const;

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<Index> row_start_{0};
  std::vector<Index> col_;
  std::vector<double> values_;
};

/// Finite-difference operator along one axis. Order 1 is the forward
/// difference [-1, +1]/h, order 2 the stencil [+1, -2, +1]/h^2. Rows whose
/// stencil leaves the grid or touches a voxel outside `support` are zero.
SparseMatrix difference_operator(Grid const& grid, int axis, int order, Mask const& support);

/// One row-block of a stacked least-squares system: diag(weights) * op.
struct WeightedBlock {
  RealVector weights;
  SparseMatrix op;
};

/// A = sum_b op_b^T diag(w_b)^2 op_b. Exactly symmetric by construction.
SparseMatrix assemble_normal_equations(std::span<WeightedBlock const> blocks);

/// op^T diag(w)^2 obs, the right-hand side contributed by a data block.
RealVector normal_rhs(WeightedBlock const& block, RealVector const& observation);

enum class PreconditionerKind { Identity, Jacobi, IncompleteCholesky };

PreconditionerKind parse_preconditioner(std::string const& name);

class Preconditioner {
 public:
  static Preconditioner build(PreconditionerKind kind, SparseMatrix const& a);

  PreconditionerKind kind() const { return kind_; }
  /// Diagonal shift that was needed for IC(0) to succeed (0 if none).
  double shift() const { return shift_; }

  void apply(RealVector const& r, RealVector& z) const;

 private:
  PreconditionerKind kind_ = PreconditionerKind::Identity;
  RealVector inverse_diagonal_;
  // IC(0) factor in compressed rows, diagonal stored last in each row.
  std::vector<Index> start_;
  std::vector<Index> col_;
  std::vector<double> val_;
  double shift_ = 0.0;
};

struct SolveResult {
  RealVector x;
  Index iterations = 0;
  bool converged = false;
  std::vector<double> residual_history; // relative residual after each iteration
};

/// Preconditioned conjugate gradients from x = 0. Stops when
/// ||Ax - b|| / ||b|| <= tol or after max_iter iterations.
SolveResult pcg_solve(SparseMatrix const& a, RealVector const& b, Preconditioner const& precond, double tol = 1e-8,
                      Index max_iter = 2000);

} // namespace nfsense
