#include "nvstark/feedback.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "nvstark/rng.hpp"

namespace nvstark::feedback {

void FeedbackConfig::validate(int n_bins) const {
  if (integration_n < 1)
    throw std::invalid_argument("integration_n must be >= 1");
  if (target_bin != -1 && (target_bin < 0 || target_bin >= n_bins))
    throw std::invalid_argument("target_bin outside [0, n_bins)");
  if (threshold_counts != -1.0 && threshold_counts < 0)
    throw std::invalid_argument("threshold_counts must be >= 0");
  if (!(v_dc_min <= v_dc_max))
    throw std::invalid_argument("v_dc limits inverted");
}

int FeedbackConfig::resolve_target_bin(int n_bins) const {
  return target_bin == -1 ? n_bins / 2 : target_bin;
}

double FeedbackConfig::resolve_threshold(const scan::ScanConfig& cfg) const {
  return threshold_counts < 0 ? 1000.0 * cfg.bin_dwell_s() : threshold_counts;
}

double voltage_increment(double gain_v_per_bin, double target_bin,
                         std::span<const double> recent_b) {
  if (recent_b.empty())
    throw std::invalid_argument("voltage_increment: empty history");
  const double mean =
      std::accumulate(recent_b.begin(), recent_b.end(), 0.0) /
      static_cast<double>(recent_b.size());
  return gain_v_per_bin * (target_bin - mean);
}

ControllerDecision controller_step(std::span<const scan::ScanRecord> history,
                                   const FeedbackConfig& cfg,
                                   const scan::ScanConfig& scan_cfg,
                                   double v_dc) {
  if (history.empty())
    throw std::invalid_argument("controller_step: empty history");
  cfg.validate(scan_cfg.n_bins);

  if (!cfg.enabled) return {v_dc, Action::hold};

  const scan::ScanRecord& current = history.back();
  const double threshold = cfg.resolve_threshold(scan_cfg);
  if (static_cast<double>(current.c_max) < threshold)
    return {v_dc, Action::repump};

  // average the argmax over up to N most recent above-threshold records
  std::vector<double> recent;
  recent.reserve(cfg.integration_n);
  for (auto it = history.rbegin();
       it != history.rend() && static_cast<int>(recent.size()) < cfg.integration_n;
       ++it) {
    if (static_cast<double>(it->c_max) < threshold) continue;
    recent.push_back(static_cast<double>(it->b_max));
  }
  const double dv = voltage_increment(
      cfg.gain_v_per_bin, cfg.resolve_target_bin(scan_cfg.n_bins), recent);
  const double clamped = std::clamp(v_dc + dv, cfg.v_dc_min, cfg.v_dc_max);
  return {clamped, Action::adjust};
}

namespace {

std::optional<fitting::PeakFit> try_fit_record(const scan::ScanRecord& rec,
                                               double threshold) {
  if (static_cast<double>(rec.c_max) < threshold) return std::nullopt;
  std::vector<double> y(rec.bin_counts.size());
  for (std::size_t i = 0; i < y.size(); ++i)
    y[i] = static_cast<double>(rec.bin_counts[i]);
  try {
    auto fit = fitting::fit_peak(rec.bin_axis, y, fitting::Profile::lorentzian);
    const double span = rec.bin_axis.back() - rec.bin_axis.front();
    if (!fit.converged || !(fit.amplitude > 0) || !(fit.fwhm > 0) ||
        fit.fwhm > 2.0 * span || fit.center < rec.bin_axis.front() ||
        fit.center > rec.bin_axis.back())
      return std::nullopt;
    return fit;
  } catch (const std::invalid_argument&) {
    return std::nullopt;
  }
}

}  // namespace

LockRunResult run_locked_experiment(const scan::ScanConfig& scan_cfg,
                                    const FeedbackConfig& fb_cfg,
                                    const diffusion::DiffusionParams& diff_params,
                                    const scan::EmitterModel& emitter,
                                    double duration_s, std::uint64_t seed) {
  scan_cfg.validate();
  fb_cfg.validate(scan_cfg.n_bins);
  diff_params.validate();
  if (!(duration_s > 0))
    throw std::invalid_argument("duration_s must be > 0");

  auto trajectory_rng = make_rng(seed, 1);
  auto photon_rng = make_rng(seed, 2);

  diffusion::DiffusionState state;
  if (diff_params.reversion_rate > 0) {
    // start in the stationary drift distribution
    std::normal_distribution<double> gauss(0.0,
                                           diff_params.stationary_sigma_mhz());
    state.detuning_mhz = gauss(trajectory_rng);
  }

  const auto n_scans =
      static_cast<std::uint64_t>(std::floor(duration_s / scan_cfg.period_s));
  const double threshold = fb_cfg.resolve_threshold(scan_cfg);

  LockRunResult out;
  out.records.reserve(n_scans);
  out.fits.reserve(n_scans);

  double v_dc = fb_cfg.v_dc_init;
  for (std::uint64_t i = 0; i < n_scans; ++i) {
    scan::ScanRecord rec = scan::run_scan(scan_cfg, emitter, state, diff_params,
                                          v_dc, i, trajectory_rng, photon_rng);
    if (fb_cfg.enabled) {
      out.records.push_back(std::move(rec));
      const auto d = controller_step(out.records, fb_cfg, scan_cfg, v_dc);
      if (d.action == Action::repump) {
        state = diffusion::apply_repump(state, diff_params, trajectory_rng);
        out.records.back().repump_applied = true;
      } else if (d.action == Action::adjust) {
        v_dc = d.new_v_dc;
      }
    } else {
      // reference protocol: repump during every back-scan
      out.records.push_back(std::move(rec));
      state = diffusion::apply_repump(state, diff_params, trajectory_rng);
      out.records.back().repump_applied = true;
    }
    out.fits.push_back(try_fit_record(out.records.back(), threshold));
    out.trajectory.push_back(
        {state.time_s, state.detuning_mhz, state.charge_bright});
  }

  out.final_v_dc = v_dc;
  out.metrics = compute_metrics(out.records, out.fits, scan_cfg, fb_cfg,
                                emitter.stark_ghz_per_v);
  return out;
}

LockMetrics compute_metrics(std::span<const scan::ScanRecord> records,
                            std::span<const std::optional<fitting::PeakFit>> fits,
                            const scan::ScanConfig& scan_cfg,
                            const FeedbackConfig& fb_cfg,
                            double stark_ghz_per_v) {
  LockMetrics m;
  if (records.empty()) return m;

  const double to_ghz =
      scan_cfg.mode == scan::ScanMode::voltage_sweep ? stark_ghz_per_v : 1.0;

  // sigma over fitted peak positions
  std::vector<double> centers;
  for (const auto& f : fits)
    if (f) centers.push_back(f->center * to_ghz);
  m.fitted_scans = static_cast<int>(centers.size());
  if (centers.size() >= 2) {
    const double mean =
        std::accumulate(centers.begin(), centers.end(), 0.0) / centers.size();
    double ss = 0.0;
    for (double c : centers) ss += (c - mean) * (c - mean);
    m.sigma_mhz = std::sqrt(ss / (centers.size() - 1)) * 1e3;
    m.valid = true;
  }

  // Gamma_inhom from the bin-wise sum of all scans
  const auto axis = scan::bin_axis(scan_cfg);
  std::vector<double> summed(axis.size(), 0.0);
  for (const auto& rec : records)
    for (std::size_t i = 0; i < summed.size(); ++i)
      summed[i] += static_cast<double>(rec.bin_counts[i]);
  try {
    const auto fit =
        fitting::fit_peak(axis, summed, fitting::Profile::gaussian);
    if (fit.converged && fit.fwhm > 0) m.gamma_inhom_ghz = fit.fwhm * to_ghz;
  } catch (const std::invalid_argument&) {
    // all-dark run: no summed profile to fit
  }

  // background-subtracted mean rate
  const double dwell = scan_cfg.bin_dwell_s();
  double signal = 0.0;
  for (const auto& rec : records) {
    double total = 0.0;
    for (auto c : rec.bin_counts) total += static_cast<double>(c);
    signal += total - scan_cfg.background_cps * dwell * scan_cfg.n_bins;
  }
  m.mean_rate_cps = signal / (static_cast<double>(records.size()) * scan_cfg.period_s);

  // repump bookkeeping and recovery times
  const double threshold = fb_cfg.resolve_threshold(scan_cfg);
  const int target = fb_cfg.resolve_target_bin(scan_cfg.n_bins);
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].repump_applied) continue;
    ++m.repump_count;
    for (std::size_t j = i + 1; j < records.size(); ++j) {
      if (records[j].repump_applied) break;  // next event took over
      if (static_cast<double>(records[j].c_max) >= threshold &&
          std::abs(records[j].b_max - target) <= 1) {
        m.recovery_scans.push_back(static_cast<int>(j - i));
        break;
      }
    }
  }
  return m;
}

}  // namespace nvstark::feedback
