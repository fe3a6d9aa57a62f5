#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nfsense/types.hpp"

namespace nfsense {

struct Phantom {
  ComplexVector image;
  Mask support;
};

std::vector<std::string> const& phantom_kinds();

/// Piecewise-constant magnitude phantom ("shepp-like", "discs" or "checker")
/// in normalised coordinates u = x / fov. `smooth_phase` adds a low-order
/// phase variation inside the support.
Phantom make_phantom(Grid const& grid, std::string const& kind, bool smooth_phase = false);

/// Gaussian magnitude centred on points around the FOV perimeter with a
/// per-coil linear phase ramp. `decay` is the Gaussian exponent in normalised
/// units: |S| = exp(-decay * |u - c|^2).
SensitivityMaps synth_coils(Grid const& grid, Index coils, double decay = 1.5);

struct SpiralParams {
  Index samples = 4096;   // per plane
  double turns = 16.0;
  double k_max = 0.0;     // rad/m
  int dimensionality = 2; // 2 -> (t, kx, ky); 3 -> (t, kx, ky, kz)
  double dwell = 4e-6;    // s
  Index planes = 1;       // kz planes in 3D, centred like the FFT grid
  double kz_step = 0.0;   // rad/m
};

/// Archimedean spiral k(t) = k_max (t/T) (cos, sin)(2 pi turns t / T). In 3D
/// one spiral per kz plane, played back to back so time keeps increasing.
TemporalBasis make_spiral(SpiralParams const& params);

/// Raster over the FFT k-grid keeping every R-th line along `axis`, x
/// fastest. Columns are (t, kx, ky[, kz]) for the grid's dimensionality.
TemporalBasis make_cartesian(Grid const& grid, Index undersample = 1, int axis = 1, double dwell = 4e-6);

/// Independent per-element evaluation of
///   sigma(k, c) = sum_l S(l, c) rho(l) exp(i sum_p temporal(k, p) spatial(p, l))
/// plus complex Gaussian noise of standard deviation `noise_sd` per real part.
RawCoilData forward_signal(ComplexVector const& rho, ComplexMatrix const& sens, RealMatrix const& spatial,
                           RealMatrix const& temporal, double noise_sd = 0.0, std::uint64_t seed = 0);

inline constexpr Index kDenseOracleCap = Index(1) << 24;

/// Explicit (K * coils) x L encoding matrix; row kappa + K * coil.
ComplexMatrix dense_encoding_matrix(ComplexMatrix const& sens, RealMatrix const& spatial, RealMatrix const& temporal,
                                    Index cap = kDenseOracleCap);

RealVector make_b0(Grid const& grid, std::string const& pattern, double amplitude);

/// Multi-echo prescan of `rho` through `sens`:
///   m_n = S rho exp(i (b0 TE_n + beta (n mod 2))) + noise.
PrescanData synth_prescan(ComplexVector const& rho, ComplexMatrix const& sens, RealVector const& b0, double beta,
                          std::vector<double> const& te_s, double noise_sd, std::uint64_t seed);

struct SimulationConfig {
  Grid grid{{32, 32, 1}, {0.22, 0.22, 0.22}};
  Index coils = 4;
  double coil_decay = 1.5;
  std::string phantom = "shepp-like";
  bool smooth_phase = false;
  std::string trajectory = "spiral"; // spiral | cartesian
  Index spiral_samples = 4096;
  double spiral_turns = 16.0;
  double k_max_fraction = 1.0;       // of pi / pitch
  Index undersample = 1;
  int undersample_axis = 1;
  double dwell = 4e-6;
  int order = 1;
  bool global_term = false;
  double noise_sd = 0.0;
  std::string b0_pattern = "linear"; // zero | linear | blob
  double b0_amplitude = 200.0;       // rad/s
  double beta = 0.1;                 // rad
  Index echoes = 8;
  double te0 = 2e-3;
  double delta_te = 2.3e-3;
  double prescan_noise_sd = 0.01;
  std::uint64_t seed = 0;
};

/// Full synthetic dataset: trajectory with field terms, prescan, raw data and
/// the ground truth (rho_true, sens_true, b0_true, mask_true).
void simulate_dataset(SimulationConfig const& config, std::filesystem::path const& out);

} // namespace nfsense
