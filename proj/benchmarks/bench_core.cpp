#include <benchmark/benchmark.h>

#include "nvstark/config.hpp"
#include "nvstark/feedback.hpp"
#include "nvstark/fitting.hpp"
#include "nvstark/levels.hpp"
#include "nvstark/scan.hpp"

using namespace nvstark;

static void BM_BuildAndDiagonalize(benchmark::State& state) {
  levels::FineStructureParams p;
  double dperp = 0.0;
  for (auto _ : state) {
    dperp = dperp < 20.0 ? dperp + 0.1 : 0.0;
    const auto lv = levels::eigenlevels(
        levels::build_hamiltonian(p, {0.0, dperp, 15.0}));
    benchmark::DoNotOptimize(lv.front().energy_ghz);
  }
}
BENCHMARK(BM_BuildAndDiagonalize);

static void BM_LambdaFraction(benchmark::State& state) {
  levels::FineStructureParams p;
  double d = 0.0;
  for (auto _ : state) {
    d = d < 20.0 ? d + 0.05 : 0.05;
    benchmark::DoNotOptimize(levels::lambda_emission_fraction(p, 15.0, d));
  }
}
BENCHMARK(BM_LambdaFraction);

static void BM_RunScan(benchmark::State& state) {
  const auto profile = config::lock_profile_ural();
  diffusion::DiffusionState st;
  auto traj = make_rng(1, 1);
  auto photon = make_rng(1, 2);
  std::uint64_t i = 0;
  for (auto _ : state) {
    const auto rec = scan::run_scan(profile.scan_locked, profile.emitter, st,
                                    profile.diffusion, 0.0, i++, traj, photon);
    benchmark::DoNotOptimize(rec.c_max);
  }
}
BENCHMARK(BM_RunScan);

static void BM_LorentzianFit(benchmark::State& state) {
  std::vector<double> x(30), y(30);
  const std::array<double, 4> truth{0.0, 0.06, 90.0, 3.0};
  std::mt19937_64 rng(2);
  for (int i = 0; i < 30; ++i) {
    x[i] = -0.3 + 0.6 * i / 29.0;
    std::poisson_distribution<long> pois(
        fitting::profile_value(fitting::Profile::lorentzian, truth, x[i]));
    y[i] = static_cast<double>(pois(rng));
  }
  for (auto _ : state) {
    const auto fit = fitting::fit_peak(x, y, fitting::Profile::lorentzian);
    benchmark::DoNotOptimize(fit.center);
  }
}
BENCHMARK(BM_LorentzianFit);

static void BM_LockedMinute(benchmark::State& state) {
  const auto profile = config::lock_profile_ural();
  std::uint64_t seed = 0;
  for (auto _ : state) {
    const auto res = feedback::run_locked_experiment(
        profile.scan_locked, profile.feedback, profile.diffusion,
        profile.emitter, 60.0, seed++);
    benchmark::DoNotOptimize(res.metrics.sigma_mhz);
  }
}
BENCHMARK(BM_LockedMinute)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
