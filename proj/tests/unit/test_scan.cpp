#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <numeric>

#include "nvstark/fitting.hpp"
#include "nvstark/scan.hpp"

using namespace nvstark;
using diffusion::DiffusionParams;
using diffusion::DiffusionState;
using scan::EmitterModel;
using scan::ScanConfig;
using scan::ScanMode;

namespace {

ScanConfig ural_like() {
  ScanConfig cfg;
  cfg.mode = ScanMode::laser_scan;
  cfg.span_ghz = 1.2;
  cfg.period_s = 1.0;
  cfg.duty = 0.9;
  cfg.n_bins = 40;
  cfg.homogeneous_fwhm_mhz = 60.0;
  cfg.peak_rate_cps = 5000.0;
  cfg.background_cps = 150.0;
  return cfg;
}

}  // namespace

TEST_SUITE_BEGIN("scan");

TEST_CASE("backscan window is the final (1 - duty) of the cycle") {
  ScanConfig cfg = ural_like();
  auto w = scan::backscan_window(cfg);
  CHECK(w.begin_s == doctest::Approx(0.9));
  CHECK(w.end_s == doctest::Approx(1.0));

  cfg.duty = 0.5;
  cfg.period_s = 2.0;
  w = scan::backscan_window(cfg);
  CHECK(w.begin_s == doctest::Approx(1.0));
  CHECK(w.end_s == doctest::Approx(2.0));

  cfg.duty = 0.9;
  cfg.period_s = 0.1;
  w = scan::backscan_window(cfg);
  CHECK(w.begin_s == doctest::Approx(0.09));
  CHECK(w.end_s == doctest::Approx(0.1));
}

TEST_CASE("dark emitter: every bin expects background * dwell") {
  const ScanConfig cfg = ural_like();
  const EmitterModel em{0.0, 0.1, 0.0, 0.0};
  DiffusionState state{0.0, false, 0.0};
  const auto mu = scan::expected_bin_counts(cfg, em, state, 0.0);
  for (double m : mu)
    CHECK(m == doctest::Approx(150.0 * cfg.bin_dwell_s()).epsilon(1e-12));
}

TEST_CASE("expected counts integrate the rate exactly (per-bin Lorentzian)") {
  const ScanConfig cfg = ural_like();
  const EmitterModel em{0.0, 0.1, 0.0, 0.0};
  DiffusionState state{35.0, true, 0.0};  // 35 MHz off nominal
  const double v_dc = 0.4;
  const auto mu = scan::expected_bin_counts(cfg, em, state, v_dc);
  const auto ax = scan::bin_axis(cfg);
  const double dwell = cfg.bin_dwell_s();
  const double half = 0.5 * cfg.homogeneous_fwhm_mhz * 1e-3;
  double total_expected = 0.0;
  for (std::size_t i = 0; i < ax.size(); ++i) {
    const double det = ax[i] - (0.035 + 0.1 * v_dc);
    const double rate =
        cfg.background_cps +
        cfg.peak_rate_cps * half * half / (det * det + half * half);
    CHECK(mu[i] == doctest::Approx(rate * dwell).epsilon(1e-12));
    total_expected += rate * dwell;
  }
  const double total = std::accumulate(mu.begin(), mu.end(), 0.0);
  CHECK(total == doctest::Approx(total_expected).epsilon(1e-12));
}

TEST_CASE("bright centered emitter: argmax at center, fitted width ~ Gamma_ss") {
  const ScanConfig cfg = ural_like();
  const EmitterModel em{0.0, 0.1, 0.0, 0.0};
  const DiffusionParams quiet{0.0, 0.0, 0.0, 0.0, 0};

  double fwhm_sum = 0.0;
  int fits = 0, argmax_center = 0;
  const int seeds = 100;
  for (int s = 0; s < seeds; ++s) {
    DiffusionState state{0.0, true, 0.0};
    auto traj = make_rng(s, 1);
    auto photon = make_rng(s, 2);
    const auto rec =
        scan::run_scan(cfg, em, state, quiet, 0.0, 0, traj, photon);
    if (std::abs(rec.b_max - cfg.n_bins / 2) <= 1) ++argmax_center;
    std::vector<double> y(rec.bin_counts.begin(), rec.bin_counts.end());
    const auto fit = fitting::fit_peak(rec.bin_axis, y, fitting::Profile::lorentzian);
    if (fit.converged) {
      fwhm_sum += fit.fwhm;
      ++fits;
    }
  }
  CHECK(argmax_center > 90);
  REQUIRE(fits > 90);
  CHECK(fwhm_sum / fits == doctest::Approx(0.060).epsilon(0.15));
}

TEST_CASE("scan advances the hidden clock by one period") {
  const ScanConfig cfg = ural_like();
  const EmitterModel em{};
  const DiffusionParams p{10.0, 0.0, 0.0, 0.0, 0};
  DiffusionState state{0.0, true, 0.0};
  auto traj = make_rng(3, 1);
  auto photon = make_rng(3, 2);
  (void)scan::run_scan(cfg, em, state, p, 0.0, 0, traj, photon);
  CHECK(state.time_s == doctest::Approx(cfg.period_s).epsilon(1e-9));
}

TEST_CASE("NV2 voltage sweep resolves the 0.48 GHz line in a 0.78 GHz window") {
  ScanConfig cfg;
  cfg.mode = ScanMode::voltage_sweep;
  cfg.span_vpp = 3.0;
  cfg.period_s = 0.1;
  cfg.n_bins = 18;
  cfg.homogeneous_fwhm_mhz = 480.0;
  cfg.peak_rate_cps = 8000.0;
  cfg.background_cps = 150.0;
  const EmitterModel em{0.0, 0.26, 0.0, 0.0};
  DiffusionState state{0.0, true, 0.0};
  const auto mu = scan::expected_bin_counts(cfg, em, state, 0.0);
  const double lo = *std::min_element(mu.begin(), mu.end());
  const double hi = *std::max_element(mu.begin(), mu.end());
  CHECK(hi / lo > 1.5);  // the sweep covers ~1.6 linewidths: clearly resolved

  // in volts the apparent width is Gamma_ss / stark coefficient
  std::vector<double> y(mu.begin(), mu.end());
  const auto ax = scan::bin_axis(cfg);
  const auto fit = fitting::fit_peak(ax, y, fitting::Profile::lorentzian);
  CHECK(fit.fwhm * 0.26 == doctest::Approx(0.48).epsilon(0.1));
}

TEST_CASE("mode equivalence: same frequency track gives identical records") {
  // voltage sweep with negative tuning == laser scan over the same interval
  ScanConfig volt;
  volt.mode = ScanMode::voltage_sweep;
  volt.span_vpp = 3.0;
  volt.period_s = 0.5;
  volt.n_bins = 20;
  volt.homogeneous_fwhm_mhz = 200.0;
  volt.peak_rate_cps = 4000.0;
  volt.background_cps = 100.0;

  ScanConfig laser = volt;
  laser.mode = ScanMode::laser_scan;
  laser.span_ghz = 3.0 * 0.2;

  const EmitterModel em_volt{0.0, -0.2, 0.0, 0.0};
  const EmitterModel em_laser{0.0, -0.2, 0.0, 0.0};
  const DiffusionParams p{20.0, 0.0, 0.1, 0.0, 0};

  DiffusionState s1{40.0, true, 0.0};
  DiffusionState s2 = s1;
  auto t1 = make_rng(7, 1), f1 = make_rng(7, 2);
  auto t2 = make_rng(7, 1), f2 = make_rng(7, 2);
  const auto rv = scan::run_scan(volt, em_volt, s1, p, 0.0, 0, t1, f1);
  const auto rl = scan::run_scan(laser, em_laser, s2, p, 0.0, 0, t2, f2);
  CHECK(rv.bin_counts == rl.bin_counts);
  CHECK(rv.b_max == rl.b_max);
}

TEST_CASE("ensemble-averaged bin profile matches the Lorentzian within 3 sigma") {
  const ScanConfig cfg = ural_like();
  const EmitterModel em{0.0, 0.1, 0.0, 0.0};
  const DiffusionParams quiet{0.0, 0.0, 0.0, 0.0, 0};
  const int seeds = 600;

  std::vector<double> sum(cfg.n_bins, 0.0);
  for (int s = 0; s < seeds; ++s) {
    DiffusionState state{0.0, true, 0.0};
    auto traj = make_rng(4000 + s, 1);
    auto photon = make_rng(4000 + s, 2);
    const auto rec = scan::run_scan(cfg, em, state, quiet, 0.0, 0, traj, photon);
    for (int i = 0; i < cfg.n_bins; ++i)
      sum[i] += static_cast<double>(rec.bin_counts[i]);
  }
  DiffusionState state{0.0, true, 0.0};
  const auto mu = scan::expected_bin_counts(cfg, em, state, 0.0);
  for (int i = 0; i < cfg.n_bins; ++i) {
    const double mean = sum[i] / seeds;
    const double se = std::sqrt(mu[i] / seeds);
    CHECK(std::abs(mean - mu[i]) < 3.5 * se);  // 3 sigma, small slack for 40 bins
  }
}

TEST_CASE("invalid configs are rejected") {
  ScanConfig cfg = ural_like();
  cfg.span_ghz = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = ural_like();
  cfg.duty = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = ural_like();
  cfg.n_bins = 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_SUITE_END();
