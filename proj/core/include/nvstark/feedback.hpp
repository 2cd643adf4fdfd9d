#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "nvstark/fitting.hpp"
#include "nvstark/scan.hpp"

namespace nvstark::feedback {

// Controller inputs: dV_i = G * (B - mean of the last N argmax bins), applied
// only when the peak counts clear the threshold; below threshold the cycle is
// spent on a repump pulse and V_DC is left alone.
struct FeedbackConfig {
  double gain_v_per_bin = 0.1;     // G
  int integration_n = 1;           // N
  int target_bin = -1;             // B; -1 selects the center bin n_bins/2
  double threshold_counts = -1.0;  // T; -1 derives 1 kcts/s * bin dwell
  bool enabled = true;
  double v_dc_init = 0.0;
  double v_dc_min = -40.0;
  double v_dc_max = 40.0;

  void validate(int n_bins) const;
  int resolve_target_bin(int n_bins) const;
  double resolve_threshold(const scan::ScanConfig& cfg) const;
};

enum class Action { hold, repump, adjust };

struct ControllerDecision {
  double new_v_dc = 0.0;
  Action action = Action::hold;
};

// Pure Eq.-S1 increment; the probe form accepts fractional bin positions so
// closed-loop convergence can be studied without argmax quantization.
double voltage_increment(double gain_v_per_bin, double target_bin,
                         std::span<const double> recent_b);

// Decide on the most recent scan: repump below threshold (V_DC unchanged),
// otherwise adjust V_DC from the history of argmax bins. With fewer than N
// prior records the average runs over what exists.
ControllerDecision controller_step(std::span<const scan::ScanRecord> history,
                                   const FeedbackConfig& cfg,
                                   const scan::ScanConfig& scan_cfg,
                                   double v_dc);

struct LockMetrics {
  double sigma_mhz = 0.0;        // std of fitted peak positions
  double gamma_inhom_ghz = 0.0;  // Gaussian FWHM of the summed scans
  double mean_rate_cps = 0.0;    // background subtracted
  int repump_count = 0;
  std::vector<int> recovery_scans;  // scans-to-recover per repump event
  int fitted_scans = 0;
  bool valid = false;  // false when fewer than 2 scans could be fitted
};

struct TrajectoryPoint {
  double time_s = 0.0;
  double detuning_mhz = 0.0;
  bool bright = true;
};

struct LockRunResult {
  std::vector<scan::ScanRecord> records;
  std::vector<std::optional<fitting::PeakFit>> fits;  // per scan, in volts or GHz
  std::vector<TrajectoryPoint> trajectory;            // hidden state per scan
  LockMetrics metrics;
  double final_v_dc = 0.0;
};

// Closed-loop experiment: scan, then decide during the back-scan window.
// Feedback disabled reproduces the reference protocol (repump every scan,
// V_DC fixed). Deterministic per seed.
LockRunResult run_locked_experiment(const scan::ScanConfig& scan_cfg,
                                    const FeedbackConfig& fb_cfg,
                                    const diffusion::DiffusionParams& diff_params,
                                    const scan::EmitterModel& emitter,
                                    double duration_s, std::uint64_t seed);

// Offline metrics from a finished run. sigma converts voltage-mode positions
// to frequency through the Stark coefficient; gamma_inhom comes from a
// Gaussian fit to the bin-wise sum of all scans.
LockMetrics compute_metrics(std::span<const scan::ScanRecord> records,
                            std::span<const std::optional<fitting::PeakFit>> fits,
                            const scan::ScanConfig& scan_cfg,
                            const FeedbackConfig& fb_cfg,
                            double stark_ghz_per_v);

}  // namespace nvstark::feedback
