#include <doctest.h>

#include "nfsense/error.hpp"
#include "nfsense/masks.hpp"
#include "../support/oracles.hpp"

using namespace nfsense;

namespace {

Mask disc(Grid const& g, double cx, double cy, double r) {
  Mask m(g.size());
  for (Index l = 0; l < g.size(); ++l) {
    auto const i = g.unravel(l);
    double const dx = double(i[0]) - cx, dy = double(i[1]) - cy;
    m(l) = dx * dx + dy * dy <= r * r;
  }
  return m;
}

// Dilation oracle: every voxel within Euclidean distance r of a set voxel.
Mask ball_dilate(Grid const& g, Mask const& m, double r) {
  Mask out = Mask::Constant(g.size(), false);
  for (Index a = 0; a < g.size(); ++a) {
    if (!m(a)) continue;
    auto const ia = g.unravel(a);
    for (Index b = 0; b < g.size(); ++b) {
      auto const ib = g.unravel(b);
      double d2 = 0;
      for (int k = 0; k < 3; ++k) d2 += double(ia[k] - ib[k]) * double(ia[k] - ib[k]);
      if (d2 <= r * r) out(b) = true;
    }
  }
  return out;
}

RealVector to_mag(Mask const& m, double in, double out) {
  RealVector v(m.size());
  for (Index l = 0; l < m.size(); ++l) v(l) = m(l) ? in : out;
  return v;
}

} // namespace

TEST_CASE("rss_combine") {
  PrescanData p;
  p.te_s = {1e-3, 2e-3};
  Eigen::MatrixXcd e(1, 2);
  e << Cx(3, 0), Cx(0, 4);
  p.echoes = {e, e};
  CHECK(rss_combine(p, 0)(0) == doctest::Approx(5.0).epsilon(1e-15));

  std::mt19937_64 rng(7);
  p.echoes = {oracle::random_complex(64, 4, rng), oracle::random_complex(64, 4, rng)};
  RealVector const got = rss_combine(p, 1);
  for (Index l = 0; l < 64; ++l) {
    double s = 0;
    for (Index c = 0; c < 4; ++c) s += std::norm(p.echoes[1](l, c));
    CHECK(got(l) == std::sqrt(s));
  }
  p.echoes = {oracle::random_complex(8, 1, rng), oracle::random_complex(8, 1, rng)};
  CHECK((rss_combine(p, 0) - p.echoes[0].cwiseAbs()).norm() <= 1e-15 * p.echoes[0].norm());
  CHECK_THROWS_AS(rss_combine(p, 2), Error);
}

TEST_CASE("bias field of a constant image is one") {
  Grid const g{{16, 16, 1}, {1, 1, 1}};
  RealVector const mag = RealVector::Constant(g.size(), 3.7);
  auto const fit = estimate_bias_field(g, mag, Mask::Constant(g.size(), true));
  CHECK((fit.field.array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("bias field removes an exponential ramp") {
  Grid const g{{16, 12, 1}, {0.2, 0.15, 1}};
  auto const c = grid_coordinates(g);
  RealVector mag(g.size());
  for (Index l = 0; l < g.size(); ++l) mag(l) = 2.0 * std::exp(4.0 * c(l, 0) - 3.0 * c(l, 1));
  Mask const all = Mask::Constant(g.size(), true);
  for (int degree : {1, 2, 3}) {
    auto const fit = estimate_bias_field(g, mag, all, degree);
    RealVector const corrected = mag.cwiseQuotient(fit.field);
    CHECK((corrected.array() / corrected.mean() - 1.0).abs().maxCoeff() < 1e-10);
    CHECK(fit.field.mean() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.field.minCoeff() > 0.0);
  }
}

TEST_CASE("bias field mean over the rough mask is one") {
  Grid const g{{20, 20, 1}, {1, 1, 1}};
  std::mt19937_64 rng(11);
  RealVector const mag = (oracle::random_real(g.size(), 1, rng, 0.5, 2.0)).col(0);
  Mask const rough = disc(g, 9.5, 9.5, 7);
  auto const fit = estimate_bias_field(g, mag, rough, 3);
  double sum = 0;
  for (Index l = 0; l < g.size(); ++l)
    if (rough(l)) sum += fit.field(l);
  CHECK(std::abs(sum / double(rough.count()) - 1.0) <= 1e-12);
}

TEST_CASE("bias fit with fewer voxels than coefficients fails") {
  Grid const g{{8, 8, 1}, {1, 1, 1}};
  Mask m = Mask::Constant(g.size(), false);
  m(0) = m(9) = m(18) = true;
  CHECK_THROWS_AS(estimate_bias_field(g, RealVector::Ones(g.size()), m, 3), Error);
}

TEST_CASE("histogram threshold separates two log-normal modes") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> n(0.0, 0.1);
  Index const N = 20000;
  RealVector mag(N);
  std::vector<bool> high(N);
  for (Index i = 0; i < N; ++i) {
    high[std::size_t(i)] = i % 2 == 1;
    mag(i) = std::exp((high[std::size_t(i)] ? std::log(100.0) : 0.0) + n(rng));
  }
  double const t = trusted_threshold(mag).threshold;
  CHECK(t > 1.0);
  CHECK(t < 100.0);
  Index wrong = 0;
  for (Index i = 0; i < N; ++i) wrong += (mag(i) > t) != high[std::size_t(i)];
  CHECK(double(wrong) / double(N) < 0.01);

  double const t10 = trusted_threshold(mag * 10.0).threshold;
  CHECK(t10 == doctest::Approx(10.0 * t).epsilon(1e-9));
}

TEST_CASE("unimodal histogram is an error") {
  CHECK_THROWS_AS(trusted_threshold(RealVector::Constant(100, 2.0)), Error);
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 0.1);
  RealVector mag(5000);
  for (Index i = 0; i < mag.size(); ++i) mag(i) = std::exp(n(rng));
  // A single Gaussian mode can still have ripples; what must never happen is
  // a threshold outside the data range.
  try {
    double const t = trusted_threshold(mag).threshold;
    CHECK(t > mag.minCoeff());
    CHECK(t < mag.maxCoeff());
  } catch (Error const& e) {
    CHECK(e.kind() == ErrorKind::Numerical);
  }
}

TEST_CASE("solid disc masks") {
  Grid const g{{32, 32, 1}, {1, 1, 1}};
  Mask const d = disc(g, 15.5, 15.5, 8);
  for (Index r : {0, 1, 2, 3}) {
    MaskPair const p = compute_masks(g, to_mag(d, 10.0, 0.0), 1.0, r);
    CHECK((p.trusted == d).all());
    CHECK((p.recon == ball_dilate(g, d, double(r))).all());
  }
}

TEST_CASE("isolated voxel is dropped and holes are filled") {
  Grid const g{{32, 32, 1}, {1, 1, 1}};
  Mask d = disc(g, 12, 12, 7);
  d(g.linear(30, 30, 0)) = true;
  MaskPair p = compute_masks(g, to_mag(d, 5.0, 0.1), 1.0, 0);
  CHECK_FALSE(p.recon(g.linear(30, 30, 0)));
  CHECK(p.trusted(g.linear(30, 30, 0)));

  Mask const annulus = disc(g, 15, 15, 9) && !disc(g, 15, 15, 3);
  p = compute_masks(g, to_mag(annulus, 5.0, 0.1), 1.0, 0);
  CHECK((p.recon == disc(g, 15, 15, 9)).all());
}

TEST_CASE("largest component uses 8-connectivity, holes use 4-connectivity") {
  Grid const g{{6, 6, 1}, {1, 1, 1}};
  Mask m = Mask::Constant(g.size(), false);
  m(g.linear(1, 1, 0)) = m(g.linear(2, 2, 0)) = m(g.linear(3, 3, 0)) = true; // diagonal chain
  m(g.linear(5, 0, 0)) = true;
  Mask const lc = largest_component(g, m);
  CHECK(lc.count() == 3);
  CHECK_FALSE(lc(g.linear(5, 0, 0)));

  // A diamond ring encloses its centre only under 4-connectivity of the background.
  Mask ring = Mask::Constant(g.size(), false);
  for (auto [x, y] : {std::pair{2, 1}, {1, 2}, {3, 2}, {2, 3}}) ring(g.linear(x, y, 0)) = true;
  CHECK(fill_holes(g, ring)(g.linear(2, 2, 0)));
}

TEST_CASE("3D components use 26-connectivity") {
  Grid const g{{5, 5, 5}, {1, 1, 1}};
  Mask m = Mask::Constant(g.size(), false);
  for (Index i = 0; i < 4; ++i) m(g.linear(i, i, i)) = true;
  m(g.linear(4, 0, 4)) = true;
  CHECK(largest_component(g, m).count() == 4);
  Mask const grown = dilate(g, m, 1);
  CHECK((grown == ball_dilate(g, m, 1.0)).all());
}

TEST_CASE("mask invariants on random images") {
  Grid const g{{24, 24, 1}, {1, 1, 1}};
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 5; ++trial) {
    RealVector const mag = oracle::random_real(g.size(), 1, rng, 0.0, 1.0).col(0);
    MaskPair const dilated = compute_masks(g, mag, 0.5, 1);
    Mask const core = dilated.trusted && largest_component(g, dilated.trusted);
    CHECK(((core && !dilated.recon) == false).all());
    MaskPair const p = compute_masks(g, mag, 0.5, 0);
    // Re-thresholding the binary recon mask is idempotent without dilation.
    RealVector const bin = to_mag(p.recon, 1.0, 0.0);
    MaskPair const again = compute_masks(g, bin, 0.5, 0);
    CHECK((again.trusted == p.recon).all());
    CHECK((again.recon == p.recon).all());
  }
}

TEST_CASE("empty trusted mask is an error") {
  Grid const g{{8, 8, 1}, {1, 1, 1}};
  CHECK_THROWS_AS(compute_masks(g, RealVector::Zero(g.size()), 1.0, 1), Error);
}
