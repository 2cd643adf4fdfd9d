#pragma once

#include <string>

#include "nvstark/diffusion.hpp"
#include "nvstark/feedback.hpp"
#include "nvstark/levels.hpp"
#include "nvstark/scan.hpp"
#include "nvstark/spectra.hpp"

namespace nvstark::config {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kConfigEnvVar = "NVSTARK_CONFIG";

struct StarkMapSettings {
  levels::StarkCoefficients coefficients;  // emission-configuration defaults
  double theta_r_deg = 15.0;
};

struct EmissionSettings {
  double gs_polarization = 0.95;
  levels::BranchEmissionModel branch_model{/*upper_floor=*/0.05,
                                           /*lower_floor=*/0.78,
                                           /*center_ghz=*/6.0,
                                           /*width_ghz=*/1.2};
};

// Everything a lock run needs. The open/locked scan configs differ in span
// (the lock allows a four-fold narrower window); voltage-sweep profiles use
// the same sweep for both arms.
struct LockProfile {
  std::string name = "ural";
  scan::ScanConfig scan_open;
  scan::ScanConfig scan_locked;
  feedback::FeedbackConfig feedback;
  diffusion::DiffusionParams diffusion;
  scan::EmitterModel emitter;
};

// emission-map scenario settings
struct SpectroscopySettings {
  double v_start = 0.0;
  double v_stop = 35.0;
  double v_step = 1.0;
  double axis_min_ghz = -25.0;
  double axis_max_ghz = 45.0;
  int axis_bins = 350;
  int dark_frame_every = 8;  // 0 disables dark frames
};

// ple-map scenario settings
struct PleSettings {
  double v_start = 0.0;
  double v_stop = 19.0;
  int n_voltages = 20;
  double position_noise_mhz = 50.0;
  int n_lines = 5;
};

// theta-fit scenario settings
struct ThetaFitSettings {
  double theta_true_deg = 15.0;
  int n_points = 40;
  double delta_max_ghz = 20.0;
  double noise_frac = 0.05;
};

struct Config {
  levels::FineStructureParams finestructure;
  StarkMapSettings starkmap;
  levels::VoltageToFieldMap voltage_map;
  spectra::InstrumentModel instrument;
  EmissionSettings emission;
  scan::ScanConfig scan;  // generic scan settings (ple-map and one-offs)
  LockProfile lock;
  SpectroscopySettings spectroscopy;
  PleSettings ple;
  ThetaFitSettings theta_fit;

  void validate() const;
};

// Calibrated lock profiles. "ural" targets the narrow-line emitter
// (Gamma_ss = 60 MHz, open-loop sigma ~= 65 MHz); "nv2" the broad-line
// surface emitter (Gamma_ss = 0.48 GHz); "nv2-sweep" the fixed-laser
// AC-voltage-sweep lock (3 Vpp, 0.1 s).
LockProfile lock_profile_ural();
LockProfile lock_profile_nv2();
LockProfile lock_profile_nv2_sweep();
LockProfile lock_profile(const std::string& name);

Config defaults();

// JSON round trip. Loading starts from defaults() and applies the document
// as a (possibly partial) override; unknown keys fail with their full path.
Config from_json_text(const std::string& text);
std::string to_json_text(const Config& cfg);
Config load_file(const std::string& path);
void save_file(const Config& cfg, const std::string& path);

}  // namespace nvstark::config
