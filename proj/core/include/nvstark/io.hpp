#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nvstark/feedback.hpp"
#include "nvstark/levels.hpp"
#include "nvstark/scan.hpp"
#include "nvstark/spectra.hpp"

namespace nvstark::io {

// FNV-1a, used for config and output-file hashes in the run manifest.
std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t hash_file(const std::filesystem::path& path);

struct LevelSweepRow {
  double v_a = 0.0;
  std::array<double, 6> energies_ghz{};
  std::array<double, 6> p0{};
};

// columns: v_a, e0..e5 (GHz, descending), p0_0..p0_5
void write_level_sweep_csv(const std::filesystem::path& path,
                           std::span<const LevelSweepRow> rows);

// header `freq_ghz,counts`; metadata goes to a sidecar JSON next to it
void write_spectrum_csv(const std::filesystem::path& path,
                        const spectra::Spectrum& spectrum);
void write_spectrum_sidecar(const std::filesystem::path& path,
                            const spectra::Spectrum& spectrum);

// one row per scan: i,timestamp,v_dc,repump,b_max,c_max,c0..c{n-1}
void write_scan_log_csv(const std::filesystem::path& path,
                        std::span<const scan::ScanRecord> records);

// time_s,detuning_mhz,bright
struct TrajectorySample {
  double time_s = 0.0;
  double detuning_mhz = 0.0;
  bool bright = true;
};
void write_trajectory_csv(const std::filesystem::path& path,
                          std::span<const TrajectorySample> samples);

// per-scan fitted peaks: i,center,center_stderr,fwhm,amplitude,offset
void write_peaks_csv(const std::filesystem::path& path,
                     std::span<const std::optional<fitting::PeakFit>> fits);

void write_metrics_json(const std::filesystem::path& path,
                        const feedback::LockMetrics& metrics);

void write_text_file(const std::filesystem::path& path, const std::string& text);

// manifest.json: config hash, seed, version, and the hash of every artifact
void write_manifest(const std::filesystem::path& out_dir,
                    const std::string& scenario, std::uint64_t config_hash,
                    std::uint64_t seed,
                    std::span<const std::filesystem::path> files);

}  // namespace nvstark::io
