#include <benchmark/benchmark.h>

#include "isb/ensemble.hpp"
#include "isb/gauss_hermite.hpp"
#include "isb/overlap.hpp"
#include "isb/spin_model.hpp"
#include "isb/thermal.hpp"

using namespace isb;

namespace {

ThermalLineshapeConfig clock_2d() {
  return {TrapGeometry(to_angular(110e3), to_angular(70e3), to_angular(800.0), 0.07),
          ThermalState(4.5e-6, 4.5e-6, 4.5e-6), -280.0 * kCodata2018.bohr_radius(),
          DriveParams::from_pulse_area(to_angular(6.25), 1.0)};
}

std::vector<double> isb_grid(int n) {
  std::vector<double> g;
  for (int i = n; i >= 1; --i) g.push_back(to_angular(-400.0 * i / n));
  return g;
}

void BM_OverlapIntegral(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(overlap_integral(n, n / 2));
}
BENCHMARK(BM_OverlapIntegral)->Arg(4)->Arg(64)->Arg(512);

void BM_LogHermiteFunctions(benchmark::State& state) {
  std::vector<double> out(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    log_hermite_functions(1.7, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_LogHermiteFunctions)->Arg(64)->Arg(1024);

void BM_LineshapeExact(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto sys = SpinSystem::from_modes(ModeConfiguration::ground(n), 0.4, to_angular(5.0), to_angular(2800.0));
  const auto drive = DriveParams::from_pulse_area(to_angular(5.0), 1.5);
  const auto grid = isb_grid(100);
  for (auto _ : state) benchmark::DoNotOptimize(lineshape_exact(sys, drive, grid));
}
BENCHMARK(BM_LineshapeExact)->Arg(2)->Arg(4)->Arg(6)->Unit(benchmark::kMillisecond);

void BM_BruteForce(benchmark::State& state) {
  const auto cfg = clock_2d();
  const auto grid = isb_grid(200);
  for (auto _ : state) benchmark::DoNotOptimize(thermal_lineshape_bruteforce(cfg, grid));
}
BENCHMARK(BM_BruteForce)->Unit(benchmark::kMillisecond);

void BM_ClosedForm(benchmark::State& state) {
  const auto cfg = clock_2d();
  const auto grid = isb_grid(200);
  for (auto _ : state) benchmark::DoNotOptimize(isb_closed_form(cfg, grid));
}
BENCHMARK(BM_ClosedForm)->Unit(benchmark::kMicrosecond);

void BM_EnsembleAverage(benchmark::State& state) {
  const auto cfg = clock_2d();
  const auto grid = isb_grid(200);
  const LatticeDistribution dist;
  for (auto _ : state) benchmark::DoNotOptimize(ensemble_average(dist, cfg, grid, static_cast<int>(state.range(0)), 1));
}
BENCHMARK(BM_EnsembleAverage)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace
