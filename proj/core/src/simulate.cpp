#include "nfsense/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "nfsense/dataset.hpp"
#include "nfsense/error.hpp"
#include "nfsense/harmonics.hpp"
#include "nfsense/recon.hpp"

namespace nfsense {

namespace {

constexpr double kPi = std::numbers::pi;

struct Ellipse {
  double cx, cy, cz;
  double ax, ay, az;
  double angle; // rotation about z, radians
  double value;
};

// Normalised coordinate of voxel l, each axis in (-0.5, 0.5).
std::array<double, 3> normalised(Grid const& grid, Index l) {
  auto const idx = grid.unravel(l);
  std::array<double, 3> u{};
  for (int a = 0; a < 3; ++a) u[a] = grid.dims[a] == 1 ? 0.0 : grid.coordinate(a, idx[a]) / grid.fov[a];
  return u;
}

bool inside(Ellipse const& e, std::array<double, 3> const& u) {
  double const c = std::cos(e.angle), s = std::sin(e.angle);
  double const dx = u[0] - e.cx, dy = u[1] - e.cy, dz = u[2] - e.cz;
  double const x = c * dx + s * dy;
  double const y = -s * dx + c * dy;
  return (x * x) / (e.ax * e.ax) + (y * y) / (e.ay * e.ay) + (dz * dz) / (e.az * e.az) <= 1.0;
}

} // namespace

std::vector<std::string> const& phantom_kinds() {
  static std::vector<std::string> const kinds{"shepp-like", "discs", "checker"};
  return kinds;
}

Phantom make_phantom(Grid const& grid, std::string const& kind, bool smooth_phase) {
  grid.validate();
  auto const& kinds = phantom_kinds();
  if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) {
    std::string list;
    for (auto const& k : kinds) list += (list.empty() ? "" : ", ") + k;
    fail(ErrorKind::InvalidArgument, "unknown phantom kind '" + kind + "' (expected one of: " + list + ")");
  }
  Phantom out;
  out.image = ComplexVector::Zero(grid.size());
  out.support = Mask::Constant(grid.size(), false);

  if (kind == "checker") {
    std::array<Index, 3> cell{};
    for (int a = 0; a < 3; ++a) cell[a] = std::max<Index>(1, grid.dims[a] / 8);
    for (Index l = 0; l < grid.size(); ++l) {
      auto const idx = grid.unravel(l);
      Index const parity = idx[0] / cell[0] + idx[1] / cell[1] + idx[2] / cell[2];
      if (parity % 2 == 0) {
        out.image(l) = 1.0;
        out.support(l) = true;
      }
    }
  } else {
    // Additive ellipsoids; every covered region stays >= 0.5.
    std::vector<Ellipse> shapes;
    if (kind == "shepp-like") {
      shapes = {{0.0, 0.0, 0.0, 0.34, 0.44, 0.42, 0.0, 0.6},
                {0.0, -0.01, 0.0, 0.30, 0.40, 0.38, 0.0, 0.4},
                {0.11, 0.0, 0.0, 0.055, 0.15, 0.2, -0.3, -0.3},
                {-0.11, 0.0, 0.0, 0.08, 0.2, 0.2, 0.3, -0.3},
                {0.0, 0.17, 0.0, 0.1, 0.12, 0.2, 0.0, 0.2},
                {0.0, -0.25, 0.0, 0.04, 0.03, 0.1, 0.0, 0.3},
                {-0.04, -0.3, 0.0, 0.03, 0.025, 0.1, 0.0, 0.2}};
    } else {
      shapes = {{-0.2, -0.12, 0.0, 0.2, 0.2, 0.3, 0.0, 1.0},
                {0.2, 0.15, 0.0, 0.16, 0.16, 0.3, 0.0, 0.7},
                {0.15, -0.28, 0.0, 0.12, 0.12, 0.3, 0.0, 0.5}};
    }
    for (Index l = 0; l < grid.size(); ++l) {
      auto const u = normalised(grid, l);
      double v = 0.0;
      bool in = false;
      for (auto const& e : shapes)
        if (inside(e, u)) {
          v += e.value;
          in = true;
        }
      if (in) {
        out.image(l) = v;
        out.support(l) = true;
      }
    }
  }

  if (smooth_phase) {
    for (Index l = 0; l < grid.size(); ++l) {
      if (!out.support(l)) continue;
      auto const u = normalised(grid, l);
      double const phi = 0.6 * u[0] - 0.4 * u[1] + 1.2 * (u[0] * u[0] + u[1] * u[1]) + 0.3 * u[2];
      out.image(l) *= std::polar(1.0, phi);
    }
  }
  return out;
}

SensitivityMaps synth_coils(Grid const& grid, Index coils, double decay) {
  grid.validate();
  require(coils >= 1, "synth_coils: need at least one coil");
  require(decay >= 0.0, "synth_coils: decay must be >= 0");
  bool const volumetric = grid.dimensionality() == 3;
  SensitivityMaps out;
  out.maps.resize(grid.size(), coils);
  for (Index c = 0; c < coils; ++c) {
    double const theta = 2.0 * kPi * static_cast<double>(c) / static_cast<double>(coils);
    std::array<double, 3> const centre{0.6 * std::cos(theta), 0.6 * std::sin(theta),
                                       volumetric ? (c % 2 == 0 ? 0.3 : -0.3) : 0.0};
    double const ramp_x = 0.8 * std::cos(theta + 0.7);
    double const ramp_y = 0.8 * std::sin(theta + 0.7);
    double const offset = 0.5 * static_cast<double>(c);
    for (Index l = 0; l < grid.size(); ++l) {
      auto const u = normalised(grid, l);
      double d2 = 0.0;
      for (int a = 0; a < 3; ++a) d2 += (u[a] - centre[a]) * (u[a] - centre[a]);
      double const mag = std::exp(-decay * d2);
      double const phase = offset + kPi * (ramp_x * u[0] + ramp_y * u[1]);
      out.maps(l, c) = std::polar(mag, phase);
    }
  }
  return out;
}

TemporalBasis make_spiral(SpiralParams const& p) {
  require(p.samples >= 2, "make_spiral: need at least 2 samples per plane");
  require(p.dimensionality == 2 || p.dimensionality == 3, "make_spiral: dimensionality must be 2 or 3");
  require(p.planes >= 1 && (p.dimensionality == 3 || p.planes == 1), "make_spiral: planes require 3D");
  require(p.dwell > 0.0 && p.k_max > 0.0 && p.turns > 0.0, "make_spiral: dwell, k_max and turns must be > 0");
  TemporalBasis out;
  out.matrix.resize(p.samples * p.planes, 1 + p.dimensionality);
  double const span = static_cast<double>(p.samples - 1);
  for (Index plane = 0; plane < p.planes; ++plane) {
    double const kz = p.kz_step * static_cast<double>(plane - p.planes / 2);
    for (Index k = 0; k < p.samples; ++k) {
      Index const row = plane * p.samples + k;
      double const s = static_cast<double>(k) / span; // t / T within the plane
      double const r = p.k_max * s;
      double const angle = 2.0 * kPi * p.turns * s;
      out.matrix(row, 0) = static_cast<double>(row) * p.dwell;
      out.matrix(row, 1) = r * std::cos(angle);
      out.matrix(row, 2) = r * std::sin(angle);
      if (p.dimensionality == 3) out.matrix(row, 3) = kz;
    }
  }
  return out;
}

TemporalBasis make_cartesian(Grid const& grid, Index undersample, int axis, double dwell) {
  grid.validate();
  require(undersample >= 1, "make_cartesian: undersampling factor must be >= 1");
  int const dims = grid.dimensionality();
  require(axis >= 0 && axis < dims, "make_cartesian: axis outside the grid");
  require(dwell > 0.0, "make_cartesian: dwell must be > 0");
  std::vector<Index> kept;
  for (Index l = 0; l < grid.size(); ++l)
    if (grid.unravel(l)[static_cast<std::size_t>(axis)] % undersample == 0) kept.push_back(l);
  TemporalBasis out;
  out.matrix.resize(static_cast<Index>(kept.size()), 1 + std::max(dims, 2));
  for (std::size_t i = 0; i < kept.size(); ++i) {
    auto const row = static_cast<Index>(i);
    auto const idx = grid.unravel(kept[i]);
    out.matrix(row, 0) = static_cast<double>(row) * dwell;
    for (int a = 0; a < out.matrix.cols() - 1; ++a) {
      double const dk = 2.0 * kPi / grid.fov[a];
      out.matrix(row, 1 + a) = dk * (static_cast<double>(idx[a]) - static_cast<double>(grid.dims[a] / 2));
    }
  }
  return out;
}

RawCoilData forward_signal(ComplexVector const& rho, ComplexMatrix const& sens, RealMatrix const& spatial,
                           RealMatrix const& temporal, double noise_sd, std::uint64_t seed) {
  require(rho.size() == sens.rows() && spatial.cols() == rho.size() && temporal.cols() == spatial.rows(),
          "forward_signal: dimension mismatch");
  require(noise_sd >= 0.0, "forward_signal: noise sd must be >= 0");
  Index const K = temporal.rows(), L = rho.size(), coils = sens.cols(), terms = spatial.rows();
  RawCoilData out;
  out.samples = ComplexMatrix::Zero(K, coils);
#pragma omp parallel for schedule(static)
  for (Index k = 0; k < K; ++k) {
    for (Index c = 0; c < coils; ++c) {
      Cx acc = 0.0;
      for (Index l = 0; l < L; ++l) {
        double phi = 0.0;
        for (Index p = 0; p < terms; ++p) phi += temporal(k, p) * spatial(p, l);
        acc += sens(l, c) * rho(l) * Cx(std::cos(phi), std::sin(phi));
      }
      out.samples(k, c) = acc;
    }
  }
  if (noise_sd > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, noise_sd);
    for (Index c = 0; c < coils; ++c)
      for (Index k = 0; k < K; ++k) {
        double const re = normal(rng);
        double const im = normal(rng);
        out.samples(k, c) += Cx(re, im);
      }
  }
  return out;
}

ComplexMatrix dense_encoding_matrix(ComplexMatrix const& sens, RealMatrix const& spatial, RealMatrix const& temporal,
                                    Index cap) {
  require(spatial.cols() == sens.rows() && temporal.cols() == spatial.rows(), "dense_encoding_matrix: dimension mismatch");
  Index const K = temporal.rows(), L = sens.rows(), coils = sens.cols();
  if (K * coils * L > cap)
    fail(ErrorKind::MemoryBudget, "dense encoding matrix of " + std::to_string(K * coils * L) +
                                      " elements exceeds the oracle cap of " + std::to_string(cap));
  ComplexMatrix E(K * coils, L);
  for (Index c = 0; c < coils; ++c)
    for (Index k = 0; k < K; ++k)
      for (Index l = 0; l < L; ++l) {
        double phi = 0.0;
        for (Index p = 0; p < spatial.rows(); ++p) phi += temporal(k, p) * spatial(p, l);
        E(k + K * c, l) = sens(l, c) * Cx(std::cos(phi), std::sin(phi));
      }
  return E;
}

RealVector make_b0(Grid const& grid, std::string const& pattern, double amplitude) {
  RealVector b0 = RealVector::Zero(grid.size());
  if (pattern == "zero") return b0;
  if (pattern != "linear" && pattern != "blob")
    fail(ErrorKind::InvalidArgument, "unknown B0 pattern '" + pattern + "' (expected one of: zero, linear, blob)");
  for (Index l = 0; l < grid.size(); ++l) {
    auto const u = normalised(grid, l);
    if (pattern == "linear") {
      b0(l) = amplitude * 2.0 * u[0];
    } else {
      double const d2 = (u[0] - 0.1) * (u[0] - 0.1) + (u[1] + 0.1) * (u[1] + 0.1) + u[2] * u[2];
      b0(l) = amplitude * std::exp(-d2 / (2.0 * 0.15 * 0.15));
    }
  }
  return b0;
}

PrescanData synth_prescan(ComplexVector const& rho, ComplexMatrix const& sens, RealVector const& b0, double beta,
                          std::vector<double> const& te_s, double noise_sd, std::uint64_t seed) {
  require(rho.size() == sens.rows() && b0.size() == rho.size(), "synth_prescan: dimension mismatch");
  PrescanData out;
  out.te_s = te_s;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, noise_sd > 0.0 ? noise_sd : 1.0);
  for (std::size_t n = 0; n < te_s.size(); ++n) {
    ComplexMatrix echo(rho.size(), sens.cols());
    double const offset = (n % 2 == 1) ? beta : 0.0;
    for (Index c = 0; c < sens.cols(); ++c)
      for (Index l = 0; l < rho.size(); ++l) {
        echo(l, c) = sens(l, c) * rho(l) * std::polar(1.0, b0(l) * te_s[n] + offset);
        if (noise_sd > 0.0) {
          double const re = normal(rng);
          double const im = normal(rng);
          echo(l, c) += Cx(re, im);
        }
      }
    out.echoes.push_back(std::move(echo));
  }
  out.validate();
  return out;
}

void simulate_dataset(SimulationConfig const& cfg, std::filesystem::path const& out) {
  Grid const& grid = cfg.grid;
  grid.validate();
  int const dims = grid.dimensionality();
  require(dims >= 2, "simulate: grid must be 2D or 3D");
  require(cfg.order >= 1 && cfg.order <= 3, "simulate: order must be 1, 2 or 3");
  require(cfg.echoes >= 3, "simulate: need at least 3 prescan echoes");

  Phantom const phantom = make_phantom(grid, cfg.phantom, cfg.smooth_phase);
  SensitivityMaps const sens = synth_coils(grid, cfg.coils, cfg.coil_decay);
  RealVector const b0 = make_b0(grid, cfg.b0_pattern, cfg.b0_amplitude);

  TemporalBasis traj;
  if (cfg.trajectory == "spiral") {
    SpiralParams sp;
    sp.samples = cfg.spiral_samples;
    sp.turns = cfg.spiral_turns;
    sp.k_max = cfg.k_max_fraction * kPi / std::min(grid.pitch(0), grid.pitch(1));
    sp.dimensionality = dims;
    sp.dwell = cfg.dwell;
    sp.planes = dims == 3 ? grid.dims[2] : 1;
    sp.kz_step = 2.0 * kPi / grid.fov[2];
    traj = make_spiral(sp);
  } else if (cfg.trajectory == "cartesian") {
    traj = make_cartesian(grid, cfg.undersample, cfg.undersample_axis, cfg.dwell);
  } else {
    fail(ErrorKind::InvalidArgument, "unknown trajectory kind '" + cfg.trajectory + "' (expected spiral or cartesian)");
  }

  // Assemble (t, [k0], order-1 terms, higher-order terms). Higher-order and
  // global terms are slow sinusoids peaking at about 0.5 rad over the FOV.
  Index const K = traj.samples_count();
  Index const first_order = field_term_count(1, dims, false);
  Index const harmonics = field_term_count(cfg.order, dims, false);
  Index const terms = harmonics + (cfg.global_term ? 1 : 0);
  RealMatrix const coords = grid_coordinates(grid);
  RealMatrix const basis = solid_harmonics(cfg.order, coords, dims);
  TemporalBasis temporal;
  temporal.matrix = RealMatrix::Zero(K, 1 + terms);
  temporal.matrix.col(0) = traj.matrix.col(0);
  double const T = std::max(traj.matrix(K - 1, 0), cfg.dwell);
  Index col = 1;
  if (cfg.global_term) {
    for (Index k = 0; k < K; ++k) temporal.matrix(k, col) = 0.3 * traj.matrix(k, 0) / T;
    ++col;
  }
  temporal.matrix.middleCols(col, first_order) = traj.matrix.middleCols(1, first_order);
  for (Index h = first_order; h < harmonics; ++h) {
    double const peak = basis.row(h).cwiseAbs().maxCoeff();
    double const amp = peak > 0.0 ? 0.5 / peak : 0.0;
    double const freq = static_cast<double>(h - first_order + 1);
    for (Index k = 0; k < K; ++k)
      temporal.matrix(k, col + h) = amp * std::sin(2.0 * kPi * freq * traj.matrix(k, 0) / T);
  }

  Mask const all = Mask::Constant(grid.size(), true);
  Bases const bases = build_bases(b0, all, grid, temporal, FieldModel{cfg.order, cfg.global_term});
  RawCoilData const sigma = forward_signal(phantom.image, sens.maps, bases.spatial.matrix, temporal.matrix,
                                           cfg.noise_sd, cfg.seed);

  std::vector<double> te;
  for (Index n = 0; n < cfg.echoes; ++n) te.push_back(cfg.te0 + static_cast<double>(n) * cfg.delta_te);
  PrescanData const prescan =
      synth_prescan(phantom.image, sens.maps, b0, cfg.beta, te, cfg.prescan_noise_sd, cfg.seed + 1);

  DatasetManifest manifest;
  manifest.grid = grid;
  manifest.samples = K;
  manifest.coils = cfg.coils;
  manifest.field_terms = terms;
  manifest.echoes = cfg.echoes;
  manifest.echo_times_s = te;
  manifest.harmonic_order = cfg.order;
  manifest.global_term = cfg.global_term;
  Dataset ds = Dataset::create(out, manifest);
  ds.write_prescan(prescan);
  ds.write_complex("sigma", sigma.samples);
  ds.write_real("ktemporal", temporal.matrix);
  ds.write_complex("rho_true", phantom.image);
  ds.write_complex("sens_true", sens.maps);
  ds.write_real("b0_true", b0);
  ds.write_mask("mask_true", phantom.support);
  ds.save_manifest();
}

} // namespace nfsense
