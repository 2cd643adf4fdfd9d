#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "acceptance/criterion.hpp"
#include "nvstark/config.hpp"
#include "nvstark/feedback.hpp"

using namespace nvstark;

namespace {

struct ArmSummary {
  double mean_sigma_mhz = 0.0;
  double mean_gamma_ratio = 0.0;
  double mean_rate_cps = 0.0;
  std::vector<int> recoveries;
  int valid_runs = 0;
};

ArmSummary run_arm(const config::LockProfile& profile, bool feedback_on,
                   double duration_s, int n_seeds, std::uint64_t seed_base) {
  ArmSummary out;
  const auto& scan_cfg = feedback_on ? profile.scan_locked : profile.scan_open;
  auto fb = profile.feedback;
  fb.enabled = feedback_on;
  for (int s = 0; s < n_seeds; ++s) {
    const auto res = feedback::run_locked_experiment(
        scan_cfg, fb, profile.diffusion, profile.emitter, duration_s,
        seed_base + s);
    if (res.metrics.valid) {
      out.mean_sigma_mhz += res.metrics.sigma_mhz;
      out.mean_gamma_ratio +=
          res.metrics.gamma_inhom_ghz / (scan_cfg.homogeneous_fwhm_mhz * 1e-3);
      ++out.valid_runs;
    }
    out.mean_rate_cps += res.metrics.mean_rate_cps;
    out.recoveries.insert(out.recoveries.end(),
                          res.metrics.recovery_scans.begin(),
                          res.metrics.recovery_scans.end());
  }
  if (out.valid_runs > 0) {
    out.mean_sigma_mhz /= out.valid_runs;
    out.mean_gamma_ratio /= out.valid_runs;
  }
  out.mean_rate_cps /= n_seeds;
  return out;
}

double median_of(std::vector<int> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST_CASE("criterion 4: open-loop drift calibration") {
  acceptance::Criterion crit("criterion 4: open-loop sigma in [55, 75] MHz", 60.0);
  const auto profile = config::lock_profile_ural();
  const auto open = run_arm(profile, false, 280.0, 50, 1000);
  crit.require(open.valid_runs == 50, "all runs produce metrics");
  crit.require(open.mean_sigma_mhz >= 55.0 && open.mean_sigma_mhz <= 75.0,
               "mean sigma " + std::to_string(open.mean_sigma_mhz) + " MHz");
  CHECK(crit.passed());
}

TEST_CASE("criterion 5: closed-loop sigma reduction and recovery") {
  acceptance::Criterion crit("criterion 5: feedback sigma and recovery", 120.0);
  const auto profile = config::lock_profile_ural();
  const auto open = run_arm(profile, false, 280.0, 50, 1000);
  const auto closed = run_arm(profile, true, 280.0, 50, 2000);

  crit.require(closed.valid_runs == 50, "all closed-loop runs valid");
  crit.require(
      closed.mean_sigma_mhz <= 0.4 * open.mean_sigma_mhz,
      "sigma " + std::to_string(closed.mean_sigma_mhz) + " vs 0.4 * " +
          std::to_string(open.mean_sigma_mhz));
  crit.require(closed.mean_sigma_mhz <=
                   profile.scan_locked.homogeneous_fwhm_mhz,
               "sigma below Gamma_ss");
  crit.require(!closed.recoveries.empty(), "repump events observed");
  const double med = median_of(closed.recoveries);
  crit.require(med <= 10.0,
               "median recovery " + std::to_string(med) + " scans");
  CHECK(crit.passed());
}

TEST_CASE("criterion 6: Gamma_inhom ratios and scan-rate robustness") {
  acceptance::Criterion crit("criterion 6: Gamma_inhom / Gamma_ss", 180.0);
  const auto profile = config::lock_profile_nv2();
  const auto open = run_arm(profile, false, 300.0, 20, 3000);
  const auto closed = run_arm(profile, true, 300.0, 20, 4000);

  crit.require(open.mean_gamma_ratio >= 3.0 && open.mean_gamma_ratio <= 4.6,
               "open ratio " + std::to_string(open.mean_gamma_ratio));
  crit.require(closed.mean_gamma_ratio <= 1.5,
               "closed ratio " + std::to_string(closed.mean_gamma_ratio));

  for (double rate : {1.0, 2.0, 5.0, 10.0, 20.0}) {
    auto fast = profile;
    fast.scan_locked.period_s = 1.0 / rate;
    const auto arm = run_arm(fast, true, 300.0, 20, 5000 + int(rate) * 100);
    crit.require(arm.mean_gamma_ratio <= 1.5,
                 std::to_string(rate) + " Hz ratio " +
                     std::to_string(arm.mean_gamma_ratio));
  }
  CHECK(crit.passed());
}

TEST_CASE("criterion 7: voltage-sweep lock throughput") {
  acceptance::Criterion crit("criterion 7: sweep-lock rate >= 2x baseline", 120.0);
  const auto profile = config::lock_profile_nv2_sweep();
  const auto baseline = run_arm(profile, false, 600.0, 10, 6000);
  const auto locked = run_arm(profile, true, 600.0, 10, 7000);
  const double ratio = locked.mean_rate_cps / std::max(baseline.mean_rate_cps, 1e-9);
  crit.require(baseline.mean_rate_cps > 0, "baseline rate positive");
  crit.require(ratio >= 2.0, "ratio " + std::to_string(ratio));
  CHECK(crit.passed());
}

TEST_CASE("criterion 8: controller unit contract and stability boundary") {
  acceptance::Criterion crit("criterion 8: controller contract", 5.0);

  // Eq-S1 arithmetic, integer cases
  bool eq_ok = true;
  eq_ok &= feedback::voltage_increment(1.0, 25.0, std::vector{20.0}) == 5.0;
  eq_ok &= feedback::voltage_increment(1.0, 25.0, std::vector{24.0, 26.0}) == 0.0;
  eq_ok &= feedback::voltage_increment(0.5, 10.0, std::vector{4.0, 6.0, 8.0}) ==
           0.5 * (10.0 - 6.0);
  crit.require(eq_ok, "Eq-S1 integer arithmetic");

  // threshold branch never changes V_DC
  scan::ScanConfig scan_cfg;
  scan_cfg.n_bins = 50;
  scan_cfg.span_ghz = 1.0;
  feedback::FeedbackConfig fb;
  fb.threshold_counts = 100.0;
  fb.target_bin = 25;
  bool threshold_ok = true;
  for (int b = 0; b < 50; b += 7) {
    scan::ScanRecord rec;
    rec.bin_counts.assign(50, 0);
    rec.bin_counts[b] = 99;  // below threshold
    rec.b_max = b;
    rec.c_max = 99;
    rec.bin_axis = scan::bin_axis(scan_cfg);
    const auto d = feedback::controller_step(std::vector{rec}, fb, scan_cfg, 3.25);
    threshold_ok &= d.action == feedback::Action::repump && d.new_v_dc == 3.25;
  }
  crit.require(threshold_ok, "repump branch leaves V_DC untouched");

  // stability boundary on the noiseless continuous model
  const double k = 5.0;
  auto residual_after = [&](double gk, int iters) {
    const double gain = gk / k;
    double v = 0.0;
    const double offset = 2.0;
    for (int n = 0; n < iters; ++n) {
      const std::vector<double> b{25.0 + k * (offset + v)};
      v += feedback::voltage_increment(gain, 25.0, b);
    }
    return std::abs(offset + v);
  };
  crit.require(residual_after(1.9, 200) < 1e-4, "G k = 1.9 converges");
  crit.require(residual_after(2.1, 200) > 1e3, "G k = 2.1 diverges");
  crit.require(residual_after(0.5, 60) < 1e-6, "G k = 0.5 converges");
  crit.require(residual_after(1.0, 60) < 1e-12, "G k = 1.0 converges");
  CHECK(crit.passed());
}
