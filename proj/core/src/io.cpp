#include "nvstark/io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "nvstark/config.hpp"

namespace nvstark::io {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << std::setprecision(12);
  return out;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t hash_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return fnv1a64(ss.str());
}

void write_level_sweep_csv(const std::filesystem::path& path,
                           std::span<const LevelSweepRow> rows) {
  auto out = open_out(path);
  out << "v_a,e0_ghz,e1_ghz,e2_ghz,e3_ghz,e4_ghz,e5_ghz,"
         "p0_0,p0_1,p0_2,p0_3,p0_4,p0_5\n";
  for (const auto& r : rows) {
    out << r.v_a;
    for (double e : r.energies_ghz) out << ',' << e;
    for (double p : r.p0) out << ',' << p;
    out << '\n';
  }
}

void write_spectrum_csv(const std::filesystem::path& path,
                        const spectra::Spectrum& spectrum) {
  auto out = open_out(path);
  out << "freq_ghz,counts\n";
  for (std::size_t i = 0; i < spectrum.freq_axis_ghz.size(); ++i)
    out << spectrum.freq_axis_ghz[i] << ',' << spectrum.counts[i] << '\n';
}

void write_spectrum_sidecar(const std::filesystem::path& path,
                            const spectra::Spectrum& spectrum) {
  nlohmann::json j{{"exposure_s", spectrum.exposure_s},
                   {"voltage", spectrum.meta.voltage},
                   {"timestamp_s", spectrum.meta.timestamp_s},
                   {"dark_frame", spectrum.meta.dark_frame},
                   {"seed", spectrum.meta.seed}};
  write_text_file(path, j.dump(2) + "\n");
}

void write_scan_log_csv(const std::filesystem::path& path,
                        std::span<const scan::ScanRecord> records) {
  auto out = open_out(path);
  out << "i,timestamp,v_dc,repump,b_max,c_max";
  if (!records.empty())
    for (std::size_t k = 0; k < records.front().bin_counts.size(); ++k)
      out << ",c" << k;
  out << '\n';
  for (const auto& r : records) {
    out << r.index << ',' << r.timestamp_s << ',' << r.v_dc << ','
        << (r.repump_applied ? 1 : 0) << ',' << r.b_max << ',' << r.c_max;
    for (auto c : r.bin_counts) out << ',' << c;
    out << '\n';
  }
}

void write_trajectory_csv(const std::filesystem::path& path,
                          std::span<const TrajectorySample> samples) {
  auto out = open_out(path);
  out << "time_s,detuning_mhz,bright\n";
  for (const auto& s : samples)
    out << s.time_s << ',' << s.detuning_mhz << ',' << (s.bright ? 1 : 0)
        << '\n';
}

void write_peaks_csv(const std::filesystem::path& path,
                     std::span<const std::optional<fitting::PeakFit>> fits) {
  auto out = open_out(path);
  out << "i,center,center_stderr,fwhm,amplitude,offset\n";
  for (std::size_t i = 0; i < fits.size(); ++i) {
    if (!fits[i]) continue;
    const auto& f = *fits[i];
    out << i << ',' << f.center << ',' << f.center_stderr() << ',' << f.fwhm
        << ',' << f.amplitude << ',' << f.offset << '\n';
  }
}

void write_metrics_json(const std::filesystem::path& path,
                        const feedback::LockMetrics& metrics) {
  nlohmann::json j{{"sigma_mhz", metrics.sigma_mhz},
                   {"gamma_inhom_ghz", metrics.gamma_inhom_ghz},
                   {"mean_rate_cps", metrics.mean_rate_cps},
                   {"repump_count", metrics.repump_count},
                   {"recovery_scans", metrics.recovery_scans},
                   {"fitted_scans", metrics.fitted_scans},
                   {"valid", metrics.valid}};
  write_text_file(path, j.dump(2) + "\n");
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& text) {
  auto out = open_out(path);
  out << text;
}

void write_manifest(const std::filesystem::path& out_dir,
                    const std::string& scenario, std::uint64_t config_hash,
                    std::uint64_t seed,
                    std::span<const std::filesystem::path> files) {
  nlohmann::json flist = nlohmann::json::array();
  for (const auto& f : files)
    flist.push_back({{"name", f.filename().string()},
                     {"fnv1a64", hash_file(f)}});
  nlohmann::json j{{"scenario", scenario},
                   {"config_fnv1a64", config_hash},
                   {"seed", seed},
                   {"version", config::kVersion},
                   {"files", flist}};
  write_text_file(out_dir / "manifest.json", j.dump(2) + "\n");
}

}  // namespace nvstark::io
