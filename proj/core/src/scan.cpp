#include "nvstark/scan.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nvstark::scan {

void ScanConfig::validate() const {
  if (!(duty > 0.0 && duty < 1.0))
    throw std::invalid_argument("scan duty must be in (0, 1)");
  if (n_bins < 2) throw std::invalid_argument("scan needs n_bins >= 2");
  if (!(homogeneous_fwhm_mhz > 0))
    throw std::invalid_argument("homogeneous_fwhm_mhz must be > 0");
  if (!(period_s > 0)) throw std::invalid_argument("period_s must be > 0");
  if (mode == ScanMode::laser_scan && !(span_ghz > 0))
    throw std::invalid_argument("laser scan span must be > 0");
  if (mode == ScanMode::voltage_sweep && !(span_vpp > 0))
    throw std::invalid_argument("voltage sweep span must be > 0");
  if (!(peak_rate_cps >= 0) || !(background_cps >= 0))
    throw std::invalid_argument("rates must be >= 0");
}

TimeInterval backscan_window(const ScanConfig& cfg) {
  cfg.validate();
  return {cfg.duty * cfg.period_s, cfg.period_s};
}

std::vector<double> bin_axis(const ScanConfig& cfg) {
  cfg.validate();
  const double span =
      cfg.mode == ScanMode::laser_scan ? cfg.span_ghz : cfg.span_vpp;
  std::vector<double> axis(cfg.n_bins);
  for (int i = 0; i < cfg.n_bins; ++i)
    axis[i] = (i + 0.5) / cfg.n_bins * span - 0.5 * span;
  return axis;
}

double resonance_rate_cps(const ScanConfig& cfg, double detuning_ghz) {
  const double half = 0.5 * cfg.homogeneous_fwhm_mhz * 1e-3;  // GHz
  return cfg.peak_rate_cps * half * half /
         (detuning_ghz * detuning_ghz + half * half);
}

namespace {

// laser-emitter detuning at one bin, given the frozen hidden state
double bin_detuning_ghz(const ScanConfig& cfg, const EmitterModel& emitter,
                        double detuning_mhz, double v_dc, double axis_value) {
  const double transition_base =
      emitter.zpl_offset_ghz + detuning_mhz * 1e-3;
  if (cfg.mode == ScanMode::laser_scan) {
    const double excitation = emitter.scan_center_ghz + axis_value;
    const double transition = transition_base + emitter.stark_ghz_per_v * v_dc;
    return excitation - transition;
  }
  const double transition =
      transition_base + emitter.stark_ghz_per_v * (v_dc + axis_value);
  return emitter.laser_freq_ghz - transition;
}

}  // namespace

std::vector<double> expected_bin_counts(const ScanConfig& cfg,
                                        const EmitterModel& emitter,
                                        const diffusion::DiffusionState& state,
                                        double v_dc) {
  cfg.validate();
  const auto axis = bin_axis(cfg);
  const double dwell = cfg.bin_dwell_s();
  std::vector<double> mu(axis.size());
  for (std::size_t i = 0; i < axis.size(); ++i) {
    double rate = cfg.background_cps;
    if (state.charge_bright)
      rate += resonance_rate_cps(
          cfg, bin_detuning_ghz(cfg, emitter, state.detuning_mhz, v_dc, axis[i]));
    mu[i] = rate * dwell;
  }
  return mu;
}

ScanRecord run_scan(const ScanConfig& cfg, const EmitterModel& emitter,
                    diffusion::DiffusionState& state,
                    const diffusion::DiffusionParams& diff_params, double v_dc,
                    std::uint64_t index, std::mt19937_64& trajectory_rng,
                    std::mt19937_64& photon_rng) {
  cfg.validate();
  diff_params.validate();

  ScanRecord rec;
  rec.index = index;
  rec.v_dc = v_dc;
  rec.timestamp_s = state.time_s;
  rec.bin_axis = bin_axis(cfg);
  rec.bin_counts.resize(cfg.n_bins);

  state = diffusion::maybe_ionize(state, diff_params, trajectory_rng);

  const double dwell = cfg.bin_dwell_s();
  for (int i = 0; i < cfg.n_bins; ++i) {
    state = diffusion::evolve(state, diff_params, dwell, trajectory_rng);
    double rate = cfg.background_cps;
    if (state.charge_bright)
      rate += resonance_rate_cps(
          cfg, bin_detuning_ghz(cfg, emitter, state.detuning_mhz, v_dc,
                                rec.bin_axis[i]));
    const double mu = rate * dwell;
    if (mu > 0) {
      std::poisson_distribution<std::int64_t> pois(mu);
      rec.bin_counts[i] = pois(photon_rng);
    }
  }
  // drift continues through the back-scan
  const double backscan = cfg.period_s * (1.0 - cfg.duty);
  if (backscan > 0)
    state = diffusion::evolve(state, diff_params, backscan, trajectory_rng);

  const auto max_it = std::max_element(rec.bin_counts.begin(), rec.bin_counts.end());
  rec.c_max = *max_it;
  rec.b_max = static_cast<int>(max_it - rec.bin_counts.begin());
  return rec;
}

}  // namespace nvstark::scan
