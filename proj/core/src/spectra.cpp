#include "nvstark/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nvstark/rng.hpp"

namespace nvstark::spectra {

namespace {

constexpr double kFwhmToSigma = 0.42466090014400953;

void check_axis(std::span<const double> axis) {
  if (axis.size() < 2)
    throw std::invalid_argument("spectrum axis must have >= 2 bins");
  const double step = axis[1] - axis[0];
  if (!(step > 0)) throw std::invalid_argument("spectrum axis must increase");
  for (std::size_t i = 1; i < axis.size(); ++i)
    if (std::abs((axis[i] - axis[i - 1]) - step) > 1e-9)
      throw std::invalid_argument("spectrum axis must be uniform");
}

double gaussian_area_counts(const fitting::PeakFit& p, double bin_width) {
  // area under amplitude*exp(...), in counts, for a binned spectrum
  return p.amplitude * p.fwhm * kFwhmToSigma * std::sqrt(2.0 * M_PI) / bin_width;
}

}  // namespace

void InstrumentModel::validate() const {
  if (!(resolution_fwhm_ghz > 0))
    throw std::invalid_argument("resolution_fwhm_ghz must be > 0");
  if (!(exposure_s > 0)) throw std::invalid_argument("exposure_s must be > 0");
  if (!(background_cps >= 0))
    throw std::invalid_argument("background_cps must be >= 0");
  if (!(collection_efficiency >= 0))
    throw std::invalid_argument("collection_efficiency must be >= 0");
}

std::vector<double> expected_counts(std::span<const levels::TransitionLine> lines,
                                    const InstrumentModel& inst,
                                    std::span<const double> freq_axis_ghz) {
  inst.validate();
  check_axis(freq_axis_ghz);
  const double bin = freq_axis_ghz[1] - freq_axis_ghz[0];
  const double sigma = inst.resolution_fwhm_ghz * kFwhmToSigma;
  const double norm = bin / (sigma * std::sqrt(2.0 * M_PI));

  std::vector<double> mu(freq_axis_ghz.size(),
                         inst.background_cps * inst.exposure_s);
  for (const auto& line : lines) {
    if (!std::isfinite(line.frequency_ghz) || !std::isfinite(line.intensity))
      throw std::invalid_argument("transition line must be finite");
    const double area =
        line.intensity * inst.collection_efficiency * inst.exposure_s;
    for (std::size_t i = 0; i < freq_axis_ghz.size(); ++i) {
      const double dx = freq_axis_ghz[i] - line.frequency_ghz;
      mu[i] += area * norm * std::exp(-0.5 * dx * dx / (sigma * sigma));
    }
  }
  return mu;
}

Spectrum render_emission_spectrum(std::span<const levels::TransitionLine> lines,
                                  const InstrumentModel& inst,
                                  std::span<const double> freq_axis_ghz,
                                  std::uint64_t seed, bool dark_frame) {
  const std::vector<double> mu =
      dark_frame ? expected_counts({}, inst, freq_axis_ghz)
                 : expected_counts(lines, inst, freq_axis_ghz);

  Spectrum out;
  out.freq_axis_ghz.assign(freq_axis_ghz.begin(), freq_axis_ghz.end());
  out.exposure_s = inst.exposure_s;
  out.meta.seed = seed;
  out.meta.dark_frame = dark_frame;
  out.counts.resize(mu.size());

  auto rng = make_rng(seed);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    std::poisson_distribution<std::int64_t> pois(mu[i]);
    out.counts[i] = mu[i] > 0 ? pois(rng) : 0;
  }
  return out;
}

RateEstimate total_zpl_rate(const Spectrum& spectrum,
                            std::span<const fitting::PeakFit> peaks) {
  if (spectrum.freq_axis_ghz.empty() || spectrum.exposure_s <= 0)
    throw std::invalid_argument("total_zpl_rate: empty spectrum");
  const std::size_t n = spectrum.freq_axis_ghz.size();

  // mark +-1.5 FWHM windows; overlaps merge by construction
  std::vector<bool> in_window(n, false);
  for (const auto& p : peaks) {
    if (!(p.fwhm > 0)) throw std::invalid_argument("peak without valid FWHM");
    for (std::size_t i = 0; i < n; ++i)
      if (std::abs(spectrum.freq_axis_ghz[i] - p.center) <= 1.5 * p.fwhm)
        in_window[i] = true;
  }

  double bg_sum = 0.0;
  std::size_t bg_n = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!in_window[i]) {
      bg_sum += static_cast<double>(spectrum.counts[i]);
      ++bg_n;
    }
  }
  const double bg_mean = bg_n > 0 ? bg_sum / static_cast<double>(bg_n) : 0.0;

  double signal = 0.0, raw = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (in_window[i]) {
      signal += static_cast<double>(spectrum.counts[i]) - bg_mean;
      raw += static_cast<double>(spectrum.counts[i]);
    }
  }
  return {signal / spectrum.exposure_s,
          std::sqrt(std::max(raw, 1.0)) / spectrum.exposure_s};
}

PolarizationBound gs_polarization_bound(const Spectrum& spectrum,
                                        double a2_line_freq_ghz,
                                        const fitting::PeakFit& reference,
                                        double confidence_z) {
  if (spectrum.freq_axis_ghz.empty())
    throw std::invalid_argument("gs_polarization_bound: empty spectrum");
  const auto& axis = spectrum.freq_axis_ghz;
  const double bin = axis[1] - axis[0];
  const double half_window = 1.5 * reference.fwhm;
  if (a2_line_freq_ghz - half_window < axis.front() ||
      a2_line_freq_ghz + half_window > axis.back())
    throw std::invalid_argument("gs_polarization_bound: A2 window outside axis");

  double a2_counts = 0.0;
  std::size_t a2_bins = 0;
  double bg_sum = 0.0;
  std::size_t bg_n = 0;
  for (std::size_t i = 0; i < axis.size(); ++i) {
    const bool in_a2 = std::abs(axis[i] - a2_line_freq_ghz) <= half_window;
    const bool in_ref = std::abs(axis[i] - reference.center) <= half_window;
    if (in_a2) {
      a2_counts += static_cast<double>(spectrum.counts[i]);
      ++a2_bins;
    } else if (!in_ref) {
      bg_sum += static_cast<double>(spectrum.counts[i]);
      ++bg_n;
    }
  }
  const double bg_mean = bg_n > 0 ? bg_sum / static_cast<double>(bg_n) : 0.0;
  const double expected_bg = bg_mean * static_cast<double>(a2_bins);

  PolarizationBound out;
  out.a2_area_limit = std::max(0.0, a2_counts - expected_bg) +
                      confidence_z * std::sqrt(std::max(a2_counts, expected_bg));
  out.reference_area = gaussian_area_counts(reference, bin);

  const double ref_noise = confidence_z * std::sqrt(std::max(
                               1.0, bg_mean * 3.0 * reference.fwhm / bin));
  if (out.reference_area <= ref_noise || spectrum.counts.empty()) {
    out.unbounded = true;
    out.bound = 0.0;
    return out;
  }
  out.bound = out.reference_area / (out.reference_area + out.a2_area_limit);
  return out;
}

}  // namespace nvstark::spectra
