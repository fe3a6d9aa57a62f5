#include <doctest.h>

#include <optional>

#include "nfsense/error.hpp"
#include "nfsense/sparse.hpp"
#include "../support/oracles.hpp"

using namespace nfsense;

namespace {

// Loop-based stencil with the same zero-row convention.
RealVector stencil_oracle(Grid const& g, RealVector const& f, int axis, int order, Mask const& support) {
  RealVector out = RealVector::Zero(f.size());
  double const h = g.pitch(axis);
  for (Index z = 0; z < g.dims[2]; ++z)
    for (Index y = 0; y < g.dims[1]; ++y)
      for (Index x = 0; x < g.dims[0]; ++x) {
        std::array<Index, 3> i{x, y, z};
        auto at = [&](Index d) -> std::optional<Index> {
          auto j = i;
          j[std::size_t(axis)] += d;
          if (j[std::size_t(axis)] < 0 || j[std::size_t(axis)] >= g.dims[std::size_t(axis)]) return std::nullopt;
          Index const l = g.linear(j[0], j[1], j[2]);
          if (!support(l)) return std::nullopt;
          return l;
        };
        Index const l = g.linear(x, y, z);
        if (order == 1) {
          auto a = at(0), b = at(1);
          if (a && b) out(l) = 0.0 + (-1.0 / h) * f(*a) + (1.0 / h) * f(*b);
        } else {
          auto a = at(-1), b = at(0), c = at(1);
          if (a && b && c) {
            double const w = 1.0 / (h * h);
            out(l) = 0.0 + w * f(*a) + (-2.0 * w) * f(*b) + w * f(*c);
          }
        }
      }
  return out;
}

// Random SPD matrix with a 2D 5-point pattern plus diagonal dominance.
SparseMatrix random_spd(Grid const& g, std::mt19937_64& rng, double shift) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  std::vector<Triplet> t;
  for (Index l = 0; l < g.size(); ++l) {
    auto const i = g.unravel(l);
    double diag = shift;
    if (i[0] + 1 < g.dims[0]) {
      double const w = u(rng);
      t.push_back({l, l + 1, -w});
      t.push_back({l + 1, l, -w});
      t.push_back({l, l, w});
      t.push_back({l + 1, l + 1, w});
    }
    if (i[1] + 1 < g.dims[1]) {
      double const w = u(rng);
      Index const k = l + g.dims[0];
      t.push_back({l, k, -w});
      t.push_back({k, l, -w});
      t.push_back({l, l, w});
      t.push_back({k, k, w});
    }
    t.push_back({l, l, diag});
  }
  return SparseMatrix::from_triplets(g.size(), g.size(), t);
}

} // namespace

TEST_CASE("second difference of a quadratic") {
  Grid const g{{4, 1, 1}, {2.0, 1, 1}};
  double const h = 0.5;
  RealVector f(4);
  f << 1, 4, 9, 16;
  RealVector const d = difference_operator(g, 0, 2, Mask::Constant(4, true)) * f;
  CHECK(d(0) == 0.0);
  CHECK(d(1) == doctest::Approx(2.0 / (h * h)));
  CHECK(d(2) == doctest::Approx(2.0 / (h * h)));
  CHECK(d(3) == 0.0);
}

TEST_CASE("first difference of a constant is zero") {
  Grid const g{{6, 5, 4}, {1, 1, 1}};
  Mask const all = Mask::Constant(g.size(), true);
  for (int axis = 0; axis < 3; ++axis)
    CHECK((difference_operator(g, axis, 1, all) * RealVector::Constant(g.size(), 3.0)).norm() == 0.0);
}

TEST_CASE("difference operators match the loop stencil") {
  std::mt19937_64 rng(23);
  Grid const g{{8, 8, 3}, {0.8, 0.4, 0.3}};
  RealVector const f = oracle::random_real(g.size(), 1, rng).col(0);
  Mask support = Mask::Constant(g.size(), true);
  std::bernoulli_distribution drop(0.15);
  for (Index l = 0; l < g.size(); ++l) support(l) = !drop(rng);
  for (int axis = 0; axis < 3; ++axis)
    for (int order : {1, 2}) {
      RealVector const got = difference_operator(g, axis, order, support) * f;
      CHECK((got - stencil_oracle(g, f, axis, order, support)).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("from_triplets sums duplicates and sorts columns") {
  auto const m = SparseMatrix::from_triplets(2, 3, {{0, 2, 1.0}, {0, 0, 2.0}, {0, 2, 0.5}, {1, 1, -1.0}});
  CHECK(m.coeff(0, 2) == 1.5);
  CHECK(m.coeff(0, 0) == 2.0);
  CHECK(m.coeff(1, 1) == -1.0);
  CHECK(m.coeff(1, 0) == 0.0);
  auto const cols = m.row_columns(0);
  CHECK(cols.size() == 2);
  CHECK(cols[0] < cols[1]);
  CHECK((m.transpose().to_dense() - m.to_dense().transpose()).norm() == 0.0);
}

TEST_CASE("normal equations of a single identity block") {
  SparseMatrix const id = SparseMatrix::identity(5);
  std::vector<WeightedBlock> blocks{{RealVector::Ones(5), id}};
  CHECK((assemble_normal_equations(blocks).to_dense() - Eigen::MatrixXd::Identity(5, 5)).norm() == 0.0);
}

TEST_CASE("normal equations match the dense stacked system") {
  std::mt19937_64 rng(29);
  Grid const g{{6, 5, 1}, {1, 1, 1}};
  Mask const all = Mask::Constant(g.size(), true);
  std::vector<WeightedBlock> blocks;
  blocks.push_back({oracle::random_real(g.size(), 1, rng, 0, 1).col(0), SparseMatrix::identity(g.size())});
  blocks.push_back({oracle::random_real(g.size(), 1, rng, 0, 2).col(0), difference_operator(g, 0, 2, all)});
  blocks.push_back({oracle::random_real(g.size(), 1, rng, 0, 2).col(0), difference_operator(g, 1, 1, all)});
  Eigen::MatrixXd stacked(3 * g.size(), g.size());
  for (std::size_t b = 0; b < 3; ++b)
    stacked.middleRows(Index(b) * g.size(), g.size()) = blocks[b].weights.asDiagonal() * blocks[b].op.to_dense();
  Eigen::MatrixXd const dense = stacked.transpose() * stacked;
  SparseMatrix const a = assemble_normal_equations(blocks);
  Eigen::MatrixXd const ad = a.to_dense();
  CHECK((ad - dense).cwiseAbs().maxCoeff() <= 1e-13 * dense.cwiseAbs().maxCoeff());
  CHECK((ad - ad.transpose()).cwiseAbs().maxCoeff() == 0.0);

  RealVector const obs = oracle::random_real(g.size(), 1, rng).col(0);
  RealVector const rhs = normal_rhs(blocks[0], obs);
  CHECK((rhs - blocks[0].weights.cwiseAbs2().cwiseProduct(obs)).norm() <= 1e-15 * rhs.norm());
}

TEST_CASE("normal equations reject mismatched blocks") {
  std::vector<WeightedBlock> blocks{{RealVector::Ones(3), SparseMatrix::identity(3)},
                                    {RealVector::Ones(4), SparseMatrix::identity(4)}};
  CHECK_THROWS_AS(assemble_normal_equations(blocks), Error);
}

TEST_CASE("pcg on the identity converges in one iteration") {
  RealVector const b = RealVector::LinSpaced(6, -1, 2);
  auto const a = SparseMatrix::identity(6);
  for (auto kind : {PreconditionerKind::Identity, PreconditionerKind::Jacobi, PreconditionerKind::IncompleteCholesky}) {
    auto const r = pcg_solve(a, b, Preconditioner::build(kind, a));
    CHECK(r.iterations == 1);
    CHECK((r.x - b).norm() == 0.0);
  }
}

TEST_CASE("pcg solves a 2x2 system") {
  auto const a = SparseMatrix::from_triplets(2, 2, {{0, 0, 4}, {0, 1, 1}, {1, 0, 1}, {1, 1, 3}});
  RealVector b(2);
  b << 1, 2;
  auto const r = pcg_solve(a, b, Preconditioner::build(PreconditionerKind::Identity, a), 1e-14);
  CHECK(r.x(0) == doctest::Approx(1.0 / 11.0).epsilon(1e-13));
  CHECK(r.x(1) == doctest::Approx(7.0 / 11.0).epsilon(1e-13));
  CHECK(r.converged);
}

TEST_CASE("jacobi is exact for a diagonal system") {
  RealVector d = (RealVector::LinSpaced(50, 0, 4).array() * std::log(10.0)).exp().matrix();
  auto const a = SparseMatrix::diagonal(d);
  RealVector const b = RealVector::Ones(50);
  auto const jac = pcg_solve(a, b, Preconditioner::build(PreconditionerKind::Jacobi, a), 1e-10);
  auto const none = pcg_solve(a, b, Preconditioner::build(PreconditionerKind::Identity, a), 1e-10);
  CHECK(jac.iterations == 1);
  CHECK(none.iterations > 10);
  CHECK((jac.x - b.cwiseQuotient(d)).norm() <= 1e-10 * b.cwiseQuotient(d).norm());
}

TEST_CASE("A-norm of the error is non-increasing") {
  std::mt19937_64 rng(31);
  Grid const g{{12, 10, 1}, {1, 1, 1}};
  SparseMatrix const a = random_spd(g, rng, 1e-2);
  RealVector const x_true = oracle::random_real(g.size(), 1, rng).col(0);
  RealVector const b = a * x_true;
  Eigen::MatrixXd const ad = a.to_dense();
  for (auto kind : {PreconditionerKind::Identity, PreconditionerKind::Jacobi, PreconditionerKind::IncompleteCholesky}) {
    auto const pre = Preconditioner::build(kind, a);
    double last = std::numeric_limits<double>::infinity();
    for (Index n = 1; n <= 40; ++n) {
      auto const r = pcg_solve(a, b, pre, 0.0, n);
      RealVector const e = r.x - x_true;
      double const en = std::sqrt(e.dot(ad * e));
      CHECK(en <= last * (1 + 1e-12) + 1e-14);
      last = en;
    }
  }
}

TEST_CASE("preconditioned and plain solves agree") {
  std::mt19937_64 rng(37);
  Grid const g{{16, 16, 1}, {1, 1, 1}};
  SparseMatrix const a = random_spd(g, rng, 1e-3);
  RealVector const b = oracle::random_real(g.size(), 1, rng).col(0);
  double const tol = 1e-8;
  Eigen::VectorXd const dense = a.to_dense().ldlt().solve(b);
  auto const plain = pcg_solve(a, b, Preconditioner::build(PreconditionerKind::Identity, a), tol, 5000);
  auto const ic = pcg_solve(a, b, Preconditioner::build(PreconditionerKind::IncompleteCholesky, a), tol, 5000);
  auto const jac = pcg_solve(a, b, Preconditioner::build(PreconditionerKind::Jacobi, a), tol, 5000);
  REQUIRE(plain.converged);
  REQUIRE(ic.converged);
  REQUIRE(jac.converged);
  CHECK((a * ic.x - b).norm() / b.norm() <= tol);
  CHECK(ic.iterations < plain.iterations);
  double const cond_guard = (plain.x - dense).norm() / dense.norm();
  CHECK((ic.x - plain.x).norm() / plain.x.norm() <= std::max(10 * tol, 10 * cond_guard));
  CHECK((jac.x - plain.x).norm() / plain.x.norm() <= std::max(10 * tol, 10 * cond_guard));
}

TEST_CASE("ic0 matches the exact factor on a tridiagonal matrix") {
  // No fill-in occurs for tridiagonal matrices, so IC(0) is exact and PCG
  // converges in one iteration.
  std::vector<Triplet> t;
  Index const n = 30;
  for (Index i = 0; i < n; ++i) {
    t.push_back({i, i, 2.5});
    if (i + 1 < n) {
      t.push_back({i, i + 1, -1.0});
      t.push_back({i + 1, i, -1.0});
    }
  }
  auto const a = SparseMatrix::from_triplets(n, n, t);
  auto const pre = Preconditioner::build(PreconditionerKind::IncompleteCholesky, a);
  CHECK(pre.shift() == 0.0);
  auto const r = pcg_solve(a, RealVector::Ones(n), pre, 1e-12);
  CHECK(r.iterations == 1);
}

TEST_CASE("ic0 falls back to a diagonal shift when it breaks down") {
  // Symmetric, positive diagonal, but indefinite: plain IC(0) hits a
  // non-positive pivot.
  auto const a = SparseMatrix::from_triplets(2, 2, {{0, 0, 1}, {0, 1, 2}, {1, 0, 2}, {1, 1, 1}});
  auto const pre = Preconditioner::build(PreconditionerKind::IncompleteCholesky, a);
  CHECK(pre.shift() > 0.0);
}

TEST_CASE("pcg reports a singular direction") {
  auto const a = SparseMatrix::from_triplets(2, 2, {{0, 0, 1}});
  RealVector b(2);
  b << 0, 1;
  CHECK_THROWS_AS(pcg_solve(a, b, Preconditioner::build(PreconditionerKind::Identity, a)), Error);
}

TEST_CASE("preconditioner names") {
  CHECK(parse_preconditioner("ic0") == PreconditionerKind::IncompleteCholesky);
  CHECK(parse_preconditioner("jacobi") == PreconditionerKind::Jacobi);
  CHECK(parse_preconditioner("none") == PreconditionerKind::Identity);
  CHECK_THROWS_AS(parse_preconditioner("ilu"), Error);
}
