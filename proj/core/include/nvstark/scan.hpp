#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "nvstark/diffusion.hpp"

namespace nvstark::scan {

enum class ScanMode { laser_scan, voltage_sweep };

// One PLE scan cycle: a ramp over 90% of the period (forward scan, binned
// photon counting) and a back-scan over the remainder where feedback and
// repump act.
struct ScanConfig {
  ScanMode mode = ScanMode::laser_scan;
  double span_ghz = 1.2;      // laser mode: scanned frequency span
  double span_vpp = 3.0;      // voltage mode: V_AC peak-to-peak
  double period_s = 1.0;
  double duty = 0.9;          // forward-scan fraction
  int n_bins = 25;
  double homogeneous_fwhm_mhz = 60.0;  // single-scan linewidth Gamma_ss
  double peak_rate_cps = 5000.0;       // on-resonance, bright emitter
  double background_cps = 150.0;

  void validate() const;
  double bin_dwell_s() const { return period_s * duty / n_bins; }
};

// How applied voltages move the transition relative to the scan frame.
// All frequencies are offsets in GHz from the nominal lock point.
struct EmitterModel {
  double zpl_offset_ghz = 0.0;    // transition offset at zero volts
  double stark_ghz_per_v = 0.1;   // voltage-to-frequency tuning coefficient
  double scan_center_ghz = 0.0;   // laser mode: center of the scanned span
  double laser_freq_ghz = 0.0;    // voltage mode: fixed excitation frequency
};

struct ScanRecord {
  std::uint64_t index = 0;
  std::vector<std::int64_t> bin_counts;
  std::vector<double> bin_axis;   // GHz (laser mode) or V_AC volts (voltage)
  std::int64_t c_max = 0;
  int b_max = 0;                  // first-occurrence argmax
  bool repump_applied = false;
  double v_dc = 0.0;
  double timestamp_s = 0.0;
};

struct TimeInterval {
  double begin_s = 0.0;
  double end_s = 0.0;
};

// Feedback/repump window: the final (1 - duty) of each cycle.
TimeInterval backscan_window(const ScanConfig& cfg);

// Forward-ramp bin centers (GHz offsets from scan center, or V_AC volts).
std::vector<double> bin_axis(const ScanConfig& cfg);

// Expected count rate for a bright emitter at a given laser-emitter detuning.
double resonance_rate_cps(const ScanConfig& cfg, double detuning_ghz);

// Expected per-bin counts for a frozen hidden state (no Poisson noise, no
// evolution); the sum equals the time integral of the rate over the forward
// ramp exactly, since the rate is constant within a bin.
std::vector<double> expected_bin_counts(const ScanConfig& cfg,
                                        const EmitterModel& emitter,
                                        const diffusion::DiffusionState& state,
                                        double v_dc);

// Execute one scan cycle against the hidden emitter state. The state evolves
// by one bin dwell per bin (sampled after each step) and across the back-scan
// remainder; photon counts are Poisson per bin. Ionization is applied once at
// the start of the cycle.
ScanRecord run_scan(const ScanConfig& cfg, const EmitterModel& emitter,
                    diffusion::DiffusionState& state,
                    const diffusion::DiffusionParams& diff_params, double v_dc,
                    std::uint64_t index, std::mt19937_64& trajectory_rng,
                    std::mt19937_64& photon_rng);

}  // namespace nvstark::scan
