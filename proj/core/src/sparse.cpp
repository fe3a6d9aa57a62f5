#include "nfsense/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nfsense/error.hpp"

namespace nfsense {

SparseMatrix::SparseMatrix(Index rows, Index cols) : rows_(rows), cols_(cols), row_start_(rows + 1, 0) {}

SparseMatrix SparseMatrix::from_triplets(Index rows, Index cols, std::vector<Triplet> triplets) {
  for (auto const& t : triplets)
    require(t.row >= 0 && t.row < rows && t.col >= 0 && t.col < cols, "sparse triplet out of range");
  std::stable_sort(triplets.begin(), triplets.end(), [](Triplet const& a, Triplet const& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  SparseMatrix m(rows, cols);
  for (std::size_t i = 0; i < triplets.size();) {
    auto const& t = triplets[i];
    double sum = 0.0;
    std::size_t j = i;
    for (; j < triplets.size() && triplets[j].row == t.row && triplets[j].col == t.col; ++j) sum += triplets[j].value;
    m.col_.push_back(t.col);
    m.values_.push_back(sum);
    ++m.row_start_[static_cast<std::size_t>(t.row) + 1];
    i = j;
  }
  for (Index r = 0; r < rows; ++r) m.row_start_[r + 1] += m.row_start_[r];
  return m;
}

SparseMatrix SparseMatrix::identity(Index n) { return diagonal(RealVector::Ones(n)); }

SparseMatrix SparseMatrix::diagonal(RealVector const& d) {
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(d.size()));
  for (Index i = 0; i < d.size(); ++i) t.push_back({i, i, d(i)});
  return from_triplets(d.size(), d.size(), std::move(t));
}

std::span<Index const> SparseMatrix::row_columns(Index r) const {
  auto const a = row_start_[static_cast<std::size_t>(r)];
  auto const b = row_start_[static_cast<std::size_t>(r) + 1];
  return {col_.data() + a, static_cast<std::size_t>(b - a)};
}

std::span<double const> SparseMatrix::row_values(Index r) const {
  auto const a = row_start_[static_cast<std::size_t>(r)];
  auto const b = row_start_[static_cast<std::size_t>(r) + 1];
  return {values_.data() + a, static_cast<std::size_t>(b - a)};
}

double SparseMatrix::coeff(Index r, Index c) const {
  auto const cols = row_columns(r);
  auto it = std::lower_bound(cols.begin(), cols.end(), c);
  if (it == cols.end() || *it != c) return 0.0;
  return row_values(r)[static_cast<std::size_t>(it - cols.begin())];
}

RealVector SparseMatrix::diagonal() const {
  RealVector d(std::min(rows_, cols_));
  for (Index i = 0; i < d.size(); ++i) d(i) = coeff(i, i);
  return d;
}

SparseMatrix SparseMatrix::transpose() const {
  std::vector<Triplet> t;
  t.reserve(values_.size());
  for (Index r = 0; r < rows_; ++r) {
    auto const cols = row_columns(r);
    auto const vals = row_values(r);
    for (std::size_t k = 0; k < cols.size(); ++k) t.push_back({cols[k], r, vals[k]});
  }
  return from_triplets(cols_, rows_, std::move(t));
}

RealMatrix SparseMatrix::to_dense() const {
  RealMatrix d = RealMatrix::Zero(rows_, cols_);
  for (Index r = 0; r < rows_; ++r) {
    auto const cols = row_columns(r);
    auto const vals = row_values(r);
    for (std::size_t k = 0; k < cols.size(); ++k) d(r, cols[k]) += vals[k];
  }
  return d;
}

void SparseMatrix::multiply(RealVector const& x, RealVector& y) const {
  require(x.size() == cols_, "sparse multiply: dimension mismatch");
  y.resize(rows_);
#pragma omp parallel for schedule(static)
  for (Index r = 0; r < rows_; ++r) {
    double sum = 0.0;
    for (auto k = row_start_[static_cast<std::size_t>(r)]; k < row_start_[static_cast<std::size_t>(r) + 1]; ++k)
      sum += values_[static_cast<std::size_t>(k)] * x(col_[static_cast<std::size_t>(k)]);
    y(r) = sum;
  }
}

RealVector SparseMatrix::operator*(RealVector const& x) const {
  RealVector y;
  multiply(x, y);
  return y;
}

SparseMatrix SparseMatrix::select_columns(std::span<Index const> keep) const {
  std::vector<Index> remap(static_cast<std::size_t>(cols_), -1);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    require(keep[i] >= 0 && keep[i] < cols_, "select_columns: index out of range");
    remap[static_cast<std::size_t>(keep[i])] = static_cast<Index>(i);
  }
  std::vector<Triplet> t;
  for (Index r = 0; r < rows_; ++r) {
    auto const cols = row_columns(r);
    auto const vals = row_values(r);
    for (std::size_t k = 0; k < cols.size(); ++k)
      if (Index const c = remap[static_cast<std::size_t>(cols[k])]; c >= 0) t.push_back({r, c, vals[k]});
  }
  return from_triplets(rows_, static_cast<Index>(keep.size()), std::move(t));
}

SparseMatrix SparseMatrix::scale_rows(RealVector const& w) const {
  require(w.size() == rows_, "scale_rows: dimension mismatch");
  SparseMatrix out = *this;
  for (Index r = 0; r < rows_; ++r)
    for (auto k = row_start_[static_cast<std::size_t>(r)]; k < row_start_[static_cast<std::size_t>(r) + 1]; ++k)
      out.values_[static_cast<std::size_t>(k)] *= w(r);
  return out;
}

SparseMatrix difference_operator(Grid const& grid, int axis, int order, Mask const& support) {
  require(axis >= 0 && axis < 3, "difference operator: axis must be 0, 1 or 2");
  require(order == 1 || order == 2, "difference operator: order must be 1 or 2");
  require(support.size() == grid.size(), "difference operator: support does not match grid");
  Index const L = grid.size();
  Index const n = grid.dims[static_cast<std::size_t>(axis)];
  double const h = grid.pitch(axis);
  Index const stride = axis == 0 ? 1 : (axis == 1 ? grid.dims[0] : grid.dims[0] * grid.dims[1]);
  std::vector<Triplet> t;
  for (Index l = 0; l < L; ++l) {
    Index const m = grid.unravel(l)[static_cast<std::size_t>(axis)];
    if (order == 1) {
      if (m + 1 >= n || !support(l) || !support(l + stride)) continue;
      t.push_back({l, l, -1.0 / h});
      t.push_back({l, l + stride, 1.0 / h});
    } else {
      if (m < 1 || m + 1 >= n || !support(l - stride) || !support(l) || !support(l + stride)) continue;
      double const s = 1.0 / (h * h);
      t.push_back({l, l - stride, s});
      t.push_back({l, l, -2.0 * s});
      t.push_back({l, l + stride, s});
    }
  }
  return SparseMatrix::from_triplets(L, L, std::move(t));
}

SparseMatrix assemble_normal_equations(std::span<WeightedBlock const> blocks) {
  require(!blocks.empty(), "normal equations need at least one block");
  Index const n = blocks.front().op.cols();
  std::vector<Triplet> t;
  for (auto const& b : blocks) {
    if (b.op.cols() != n || b.weights.size() != b.op.rows())
      fail(ErrorKind::InvalidArgument, "normal equations: block dimensions do not match");
    for (Index r = 0; r < b.op.rows(); ++r) {
      double const w2 = b.weights(r) * b.weights(r);
      if (w2 == 0.0) continue;
      auto const cols = b.op.row_columns(r);
      auto const vals = b.op.row_values(r);
      for (std::size_t i = 0; i < cols.size(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j) t.push_back({cols[i], cols[j], w2 * (vals[i] * vals[j])});
    }
  }
  return SparseMatrix::from_triplets(n, n, std::move(t));
}

RealVector normal_rhs(WeightedBlock const& block, RealVector const& observation) {
  require(observation.size() == block.op.rows() && block.weights.size() == block.op.rows(),
          "normal rhs: dimension mismatch");
  RealVector out = RealVector::Zero(block.op.cols());
  for (Index r = 0; r < block.op.rows(); ++r) {
    double const w2o = block.weights(r) * block.weights(r) * observation(r);
    if (w2o == 0.0) continue;
    auto const cols = block.op.row_columns(r);
    auto const vals = block.op.row_values(r);
    for (std::size_t i = 0; i < cols.size(); ++i) out(cols[i]) += vals[i] * w2o;
  }
  return out;
}

PreconditionerKind parse_preconditioner(std::string const& name) {
  if (name == "none" || name == "identity") return PreconditionerKind::Identity;
  if (name == "jacobi") return PreconditionerKind::Jacobi;
  if (name == "ic0") return PreconditionerKind::IncompleteCholesky;
  fail(ErrorKind::InvalidArgument, "unknown preconditioner '" + name + "' (expected ic0, jacobi or none)");
}

namespace {

// Zero-fill incomplete Cholesky on the lower-triangular pattern of `a`,
// diagonal stored last in each row. Returns false on a non-positive pivot.
bool factor_ic0(SparseMatrix const& a, double shift, std::vector<Index>& start, std::vector<Index>& col,
                std::vector<double>& val) {
  Index const n = a.rows();
  start.assign(1, 0);
  col.clear();
  val.clear();
  for (Index i = 0; i < n; ++i) {
    auto const cols = a.row_columns(i);
    auto const vals = a.row_values(i);
    double diag = shift;
    for (std::size_t k = 0; k < cols.size(); ++k) {
      if (cols[k] < i) {
        col.push_back(cols[k]);
        val.push_back(vals[k]);
      } else if (cols[k] == i) {
        diag += vals[k];
      }
    }
    col.push_back(i);
    val.push_back(diag);
    start.push_back(static_cast<Index>(col.size()));
  }

  for (Index i = 0; i < n; ++i) {
    auto const a_i = static_cast<std::size_t>(start[static_cast<std::size_t>(i)]);
    auto const d_i = static_cast<std::size_t>(start[static_cast<std::size_t>(i) + 1]) - 1;
    for (std::size_t p = a_i; p < d_i; ++p) {
      Index const k = col[p];
      auto const a_k = static_cast<std::size_t>(start[static_cast<std::size_t>(k)]);
      auto const d_k = static_cast<std::size_t>(start[static_cast<std::size_t>(k) + 1]) - 1;
      // dot of L(i, 0:k) and L(k, 0:k) over the shared pattern
      double dot = 0.0;
      std::size_t u = a_i, v = a_k;
      while (u < p && v < d_k) {
        if (col[u] == col[v]) dot += val[u++] * val[v++];
        else if (col[u] < col[v]) ++u;
        else ++v;
      }
      val[p] = (val[p] - dot) / val[d_k];
    }
    double sq = 0.0;
    for (std::size_t p = a_i; p < d_i; ++p) sq += val[p] * val[p];
    double const pivot = val[d_i] - sq;
    if (!(pivot > 0.0) || !std::isfinite(pivot)) return false;
    val[d_i] = std::sqrt(pivot);
  }
  return true;
}

} // namespace

Preconditioner Preconditioner::build(PreconditionerKind kind, SparseMatrix const& a) {
  require(a.rows() == a.cols(), "preconditioner needs a square matrix");
  Preconditioner p;
  p.kind_ = kind;
  if (kind == PreconditionerKind::Jacobi) {
    RealVector const d = a.diagonal();
    p.inverse_diagonal_ = d.unaryExpr([](double v) { return v > 0.0 ? 1.0 / v : 1.0; });
  } else if (kind == PreconditionerKind::IncompleteCholesky) {
    if (!factor_ic0(a, 0.0, p.start_, p.col_, p.val_)) {
      double const max_diag = a.rows() ? a.diagonal().cwiseAbs().maxCoeff() : 1.0;
      double shift = 1e-3 * (max_diag > 0.0 ? max_diag : 1.0);
      int attempts = 0;
      while (!factor_ic0(a, shift, p.start_, p.col_, p.val_)) {
        if (++attempts > 60) fail(ErrorKind::Numerical, "incomplete Cholesky failed even with diagonal shift");
        shift *= 2.0;
      }
      p.shift_ = shift;
    }
  }
  return p;
}

void Preconditioner::apply(RealVector const& r, RealVector& z) const {
  switch (kind_) {
    case PreconditionerKind::Identity: z = r; return;
    case PreconditionerKind::Jacobi: z = inverse_diagonal_.cwiseProduct(r); return;
    case PreconditionerKind::IncompleteCholesky: break;
  }
  Index const n = r.size();
  // L y = r
  z = r;
  for (Index i = 0; i < n; ++i) {
    auto const a = static_cast<std::size_t>(start_[static_cast<std::size_t>(i)]);
    auto const d = static_cast<std::size_t>(start_[static_cast<std::size_t>(i) + 1]) - 1;
    double s = z(i);
    for (std::size_t p = a; p < d; ++p) s -= val_[p] * z(col_[p]);
    z(i) = s / val_[d];
  }
  // L^T z = y
  for (Index i = n - 1; i >= 0; --i) {
    auto const a = static_cast<std::size_t>(start_[static_cast<std::size_t>(i)]);
    auto const d = static_cast<std::size_t>(start_[static_cast<std::size_t>(i) + 1]) - 1;
    z(i) /= val_[d];
    double const zi = z(i);
    for (std::size_t p = a; p < d; ++p) z(col_[p]) -= val_[p] * zi;
  }
}

SolveResult pcg_solve(SparseMatrix const& a, RealVector const& b, Preconditioner const& precond, double tol,
                      Index max_iter) {
  require(a.rows() == a.cols() && a.rows() == b.size(), "pcg: dimension mismatch");
  SolveResult out;
  out.x = RealVector::Zero(b.size());
  double const bnorm = b.norm();
  if (bnorm == 0.0) {
    out.converged = true;
    return out;
  }
  RealVector r = b;
  RealVector z, p, q;
  precond.apply(r, z);
  p = z;
  double rz = r.dot(z);
  for (Index it = 0; it < max_iter; ++it) {
    a.multiply(p, q);
    double const pq = p.dot(q);
    double const alpha = rz / pq;
    if (!std::isfinite(alpha)) fail(ErrorKind::Numerical, "pcg produced a non-finite step (indefinite or corrupted system)");
    out.x += alpha * p;
    r -= alpha * q;
    ++out.iterations;
    double const rel = r.norm() / bnorm;
    out.residual_history.push_back(rel);
    if (!std::isfinite(rel)) fail(ErrorKind::Numerical, "pcg produced a non-finite iterate");
    if (rel <= tol) {
      out.converged = true;
      break;
    }
    precond.apply(r, z);
    double const rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  return out;
}

} // namespace nfsense
