#include <benchmark/benchmark.h>

#include <numbers>

#include "nfsense/recon.hpp"
#include "nfsense/sensmaps.hpp"
#include "nfsense/simulate.hpp"
#include "nfsense/sparse.hpp"

using namespace nfsense;

namespace {

struct Setup {
  Grid grid;
  RealMatrix spatial;
  RealMatrix temporal;
  ComplexMatrix sens;
  ComplexVector rho;
};

// Spiral encoding of an n x n phantom with a linear field map, four coils.
Setup make_setup(Index n) {
  Setup s;
  s.grid = Grid{{n, n, 1}, {0.22, 0.22, 0.22}};
  Mask const all = Mask::Constant(s.grid.size(), true);
  SpiralParams sp;
  sp.samples = 4 * s.grid.size();
  sp.turns = double(n) / 2.0;
  sp.k_max = std::numbers::pi / s.grid.pitch(0);
  auto const bases = build_bases(make_b0(s.grid, "linear", 200.0), all, s.grid, make_spiral(sp), {1, false});
  s.spatial = bases.spatial.matrix;
  s.temporal = bases.temporal.matrix;
  s.sens = synth_coils(s.grid, 4).maps;
  s.rho = make_phantom(s.grid, "shepp-like").image;
  return s;
}

void BM_PhaseBlock(benchmark::State& state) {
  auto const s = make_setup(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(phase_block(s.temporal, s.spatial));
  state.SetItemsProcessed(state.iterations() * s.temporal.rows() * s.spatial.cols());
}
BENCHMARK(BM_PhaseBlock)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

// One E^H E application with the phase matrix resident.
void BM_NormalFull(benchmark::State& state) {
  auto const s = make_setup(state.range(0));
  ComplexMatrix const phase = phase_block(s.temporal, s.spatial);
  for (auto _ : state) benchmark::DoNotOptimize(apply_EH(apply_E(s.rho, s.sens, phase), s.sens, phase));
}
BENCHMARK(BM_NormalFull)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

// The same application recomputing the phase in `blocks` row blocks.
void BM_NormalSplit(benchmark::State& state) {
  auto const s = make_setup(state.range(0));
  auto const starts = uniform_block_starts(s.temporal.rows(), state.range(1));
  for (auto _ : state)
    benchmark::DoNotOptimize(
        apply_EH(apply_E(s.rho, s.sens, s.temporal, s.spatial, starts), s.sens, s.temporal, s.spatial, starts));
}
BENCHMARK(BM_NormalSplit)->Args({32, 1})->Args({32, 8})->Args({32, 64})->Unit(benchmark::kMillisecond);

void BM_SmoothingSolve(benchmark::State& state) {
  Index const n = state.range(0);
  Grid const g{{n, n, 1}, {0.22, 0.22, 1}};
  auto const c = grid_coordinates(g);
  Mask recon(g.size()), trusted(g.size());
  RealMatrix raw = RealMatrix::Zero(g.size(), 1);
  for (Index l = 0; l < g.size(); ++l) {
    double const r2 = c.row(l).squaredNorm();
    recon(l) = r2 <= 0.1 * 0.1;
    trusted(l) = r2 <= 0.075 * 0.075;
    if (trusted(l)) raw(l, 0) = std::exp(-20.0 * r2) + 3.0 * c(l, 0);
  }
  SmoothingOptions opts;
  opts.alpha = default_alpha_s(g);
  opts.precond = static_cast<PreconditionerKind>(state.range(1));
  for (auto _ : state) {
    MapSmoother sm(g, trusted, recon, opts);
    benchmark::DoNotOptimize(sm.smooth(raw));
    state.counters["iterations"] = double(sm.iterations()[0]);
  }
}
BENCHMARK(BM_SmoothingSolve)
    ->Args({32, int(PreconditionerKind::Identity)})
    ->Args({32, int(PreconditionerKind::IncompleteCholesky)})
    ->Args({64, int(PreconditionerKind::Identity)})
    ->Args({64, int(PreconditionerKind::IncompleteCholesky)})
    ->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
