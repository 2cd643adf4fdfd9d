#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nvstark/fitting.hpp"
#include "nvstark/levels.hpp"

namespace nvstark::spectra {

// Spectrometer response for emission spectroscopy. Lines are instrument
// limited (Gamma_nat << resolution), so each renders as a Gaussian of
// FWHM = resolution_fwhm_ghz.
struct InstrumentModel {
  double resolution_fwhm_ghz = 0.9;
  double exposure_s = 60.0;
  double background_cps = 2.0;        // per bin
  double collection_efficiency = 1.0; // counts per unit line intensity per s

  void validate() const;
};

struct SpectrumMeta {
  double voltage = 0.0;
  double timestamp_s = 0.0;
  bool dark_frame = false;
  std::uint64_t seed = 0;
};

struct Spectrum {
  std::vector<double> freq_axis_ghz;  // uniform, strictly increasing
  std::vector<std::int64_t> counts;
  double exposure_s = 0.0;
  SpectrumMeta meta;
};

// Expected (pre-Poisson) counts per bin: each line deposits a total of
// intensity * efficiency * exposure counts spread over the Gaussian response;
// background adds background_cps * exposure to every bin.
std::vector<double> expected_counts(std::span<const levels::TransitionLine> lines,
                                    const InstrumentModel& inst,
                                    std::span<const double> freq_axis_ghz);

// Poisson-sampled spectrum, deterministic per seed. Dark frames keep only
// the background. Throws std::invalid_argument for an empty or non-uniform
// axis.
Spectrum render_emission_spectrum(std::span<const levels::TransitionLine> lines,
                                  const InstrumentModel& inst,
                                  std::span<const double> freq_axis_ghz,
                                  std::uint64_t seed, bool dark_frame = false);

struct RateEstimate {
  double rate_cps = 0.0;
  double err_cps = 0.0;  // Poisson
};

// Background-subtracted emission rate: mean off-peak background, counts
// summed over +-1.5 FWHM around each fitted peak (overlapping windows are
// merged), divided by the exposure.
RateEstimate total_zpl_rate(const Spectrum& spectrum,
                            std::span<const fitting::PeakFit> peaks);

struct PolarizationBound {
  double bound = 0.0;   // lower bound on P_GS
  bool unbounded = false;
  double a2_area_limit = 0.0;  // 95% upper confidence counts in the A2 window
  double reference_area = 0.0;
};

// Bound on the ground-state spin polarization from the absence of the
// A2 -> |+-1> line: P_GS >= A_ref / (A_ref + A_limit), with A_limit the
// one-sided upper confidence limit (default 95%) on background-subtracted
// counts in a +-1.5 FWHM window at a2_line_freq.
PolarizationBound gs_polarization_bound(const Spectrum& spectrum,
                                        double a2_line_freq_ghz,
                                        const fitting::PeakFit& reference,
                                        double confidence_z = 1.6449);

}  // namespace nvstark::spectra
