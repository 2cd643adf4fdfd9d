#include "nvstark/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace nvstark::config {

using nlohmann::json;

namespace {

json to_json(const levels::FineStructureParams& p) {
  return {{"lambda_z_ghz", p.lambda_z},
          {"d_es_par_ghz", p.d_es_par},
          {"d_es_perp_ghz", p.d_es_perp},
          {"d_gs_ghz", p.d_gs},
          {"gamma_nat_mhz", p.gamma_nat_mhz}};
}

json to_json(const StarkMapSettings& s) {
  return {{"dd_par_per_volt", s.coefficients.dd_par_per_volt},
          {"d_perp_per_volt", s.coefficients.d_perp_per_volt},
          {"theta_r_deg", s.theta_r_deg}};
}

json to_json(const levels::VoltageToFieldMap& m) {
  return {{"par_per_volt", m.par_per_volt},
          {"perp_per_volt", m.perp_per_volt},
          {"offset_par_ghz", m.offset_par},
          {"offset_perp_ghz", m.offset_perp},
          {"theta_r_deg", m.theta_r_deg}};
}

json to_json(const spectra::InstrumentModel& i) {
  return {{"resolution_fwhm_ghz", i.resolution_fwhm_ghz},
          {"exposure_s", i.exposure_s},
          {"background_cps", i.background_cps},
          {"collection_efficiency", i.collection_efficiency}};
}

json to_json(const EmissionSettings& e) {
  return {{"gs_polarization", e.gs_polarization},
          {"branch_upper_floor", e.branch_model.upper_floor},
          {"branch_lower_floor", e.branch_model.lower_floor},
          {"branch_center_ghz", e.branch_model.center_ghz},
          {"branch_width_ghz", e.branch_model.width_ghz}};
}

json to_json(const scan::ScanConfig& s) {
  return {{"mode", s.mode == scan::ScanMode::laser_scan ? "laser" : "voltage"},
          {"span_ghz", s.span_ghz},
          {"span_vpp", s.span_vpp},
          {"period_s", s.period_s},
          {"duty", s.duty},
          {"n_bins", s.n_bins},
          {"homogeneous_fwhm_mhz", s.homogeneous_fwhm_mhz},
          {"peak_rate_cps", s.peak_rate_cps},
          {"background_cps", s.background_cps}};
}

json to_json(const feedback::FeedbackConfig& f) {
  return {{"gain_v_per_bin", f.gain_v_per_bin},
          {"integration_n", f.integration_n},
          {"target_bin", f.target_bin},
          {"threshold_counts", f.threshold_counts},
          {"enabled", f.enabled},
          {"v_dc_init", f.v_dc_init},
          {"v_dc_min", f.v_dc_min},
          {"v_dc_max", f.v_dc_max}};
}

json to_json(const diffusion::DiffusionParams& d) {
  return {{"drift_sigma_mhz_per_sqrt_s", d.drift_sigma_mhz},
          {"jump_sigma_mhz", d.jump_sigma_mhz},
          {"reversion_rate_per_s", d.reversion_rate},
          {"ionization_prob_per_scan", d.ionization_prob_per_scan},
          {"seed", d.seed}};
}

json to_json(const scan::EmitterModel& e) {
  return {{"zpl_offset_ghz", e.zpl_offset_ghz},
          {"stark_ghz_per_v", e.stark_ghz_per_v},
          {"scan_center_ghz", e.scan_center_ghz},
          {"laser_freq_ghz", e.laser_freq_ghz}};
}

json to_json(const LockProfile& l) {
  return {{"profile", l.name},
          {"scan_open", to_json(l.scan_open)},
          {"scan_locked", to_json(l.scan_locked)},
          {"feedback", to_json(l.feedback)},
          {"diffusion", to_json(l.diffusion)},
          {"emitter", to_json(l.emitter)}};
}

json to_json(const SpectroscopySettings& s) {
  return {{"v_start", s.v_start},
          {"v_stop", s.v_stop},
          {"v_step", s.v_step},
          {"axis_min_ghz", s.axis_min_ghz},
          {"axis_max_ghz", s.axis_max_ghz},
          {"axis_bins", s.axis_bins},
          {"dark_frame_every", s.dark_frame_every}};
}

json to_json(const PleSettings& s) {
  return {{"v_start", s.v_start},
          {"v_stop", s.v_stop},
          {"n_voltages", s.n_voltages},
          {"position_noise_mhz", s.position_noise_mhz},
          {"n_lines", s.n_lines}};
}

json to_json(const ThetaFitSettings& s) {
  return {{"theta_true_deg", s.theta_true_deg},
          {"n_points", s.n_points},
          {"delta_max_ghz", s.delta_max_ghz},
          {"noise_frac", s.noise_frac}};
}

json full_json(const Config& c) {
  return {{"finestructure", to_json(c.finestructure)},
          {"starkmap", to_json(c.starkmap)},
          {"voltage_map", to_json(c.voltage_map)},
          {"instrument", to_json(c.instrument)},
          {"emission", to_json(c.emission)},
          {"scan", to_json(c.scan)},
          {"lock", to_json(c.lock)},
          {"spectroscopy", to_json(c.spectroscopy)},
          {"ple", to_json(c.ple)},
          {"theta_fit", to_json(c.theta_fit)}};
}

// overlay `patch` onto `base`, requiring every patched key to already exist
void merge_checked(json& base, const json& patch, const std::string& path) {
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string where = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key()))
      throw std::invalid_argument("config: unknown key '" + where + "'");
    if (it->is_object() && base[it.key()].is_object())
      merge_checked(base[it.key()], *it, where);
    else if (it->is_object() != base[it.key()].is_object())
      throw std::invalid_argument("config: wrong type for key '" + where + "'");
    else
      base[it.key()] = *it;
  }
}

template <typename T>
T get(const json& j, const char* key, const std::string& path) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument("config: bad value for key '" + path + "." +
                                key + "'");
  }
}

scan::ScanConfig scan_from_json(const json& j, const std::string& path) {
  scan::ScanConfig s;
  const std::string mode = get<std::string>(j, "mode", path);
  if (mode == "laser")
    s.mode = scan::ScanMode::laser_scan;
  else if (mode == "voltage")
    s.mode = scan::ScanMode::voltage_sweep;
  else
    throw std::invalid_argument("config: bad value for key '" + path +
                                ".mode' (laser|voltage)");
  s.span_ghz = get<double>(j, "span_ghz", path);
  s.span_vpp = get<double>(j, "span_vpp", path);
  s.period_s = get<double>(j, "period_s", path);
  s.duty = get<double>(j, "duty", path);
  s.n_bins = get<int>(j, "n_bins", path);
  s.homogeneous_fwhm_mhz = get<double>(j, "homogeneous_fwhm_mhz", path);
  s.peak_rate_cps = get<double>(j, "peak_rate_cps", path);
  s.background_cps = get<double>(j, "background_cps", path);
  return s;
}

Config config_from_json(const json& j) {
  Config c;
  {
    const auto& f = j.at("finestructure");
    c.finestructure.lambda_z = get<double>(f, "lambda_z_ghz", "finestructure");
    c.finestructure.d_es_par = get<double>(f, "d_es_par_ghz", "finestructure");
    c.finestructure.d_es_perp = get<double>(f, "d_es_perp_ghz", "finestructure");
    c.finestructure.d_gs = get<double>(f, "d_gs_ghz", "finestructure");
    c.finestructure.gamma_nat_mhz =
        get<double>(f, "gamma_nat_mhz", "finestructure");
  }
  {
    const auto& s = j.at("starkmap");
    c.starkmap.coefficients.dd_par_per_volt =
        get<double>(s, "dd_par_per_volt", "starkmap");
    c.starkmap.coefficients.d_perp_per_volt =
        get<double>(s, "d_perp_per_volt", "starkmap");
    c.starkmap.theta_r_deg = get<double>(s, "theta_r_deg", "starkmap");
  }
  {
    const auto& m = j.at("voltage_map");
    c.voltage_map.par_per_volt =
        get<std::array<double, 3>>(m, "par_per_volt", "voltage_map");
    c.voltage_map.perp_per_volt =
        get<std::array<double, 3>>(m, "perp_per_volt", "voltage_map");
    c.voltage_map.offset_par = get<double>(m, "offset_par_ghz", "voltage_map");
    c.voltage_map.offset_perp = get<double>(m, "offset_perp_ghz", "voltage_map");
    c.voltage_map.theta_r_deg = get<double>(m, "theta_r_deg", "voltage_map");
  }
  {
    const auto& i = j.at("instrument");
    c.instrument.resolution_fwhm_ghz =
        get<double>(i, "resolution_fwhm_ghz", "instrument");
    c.instrument.exposure_s = get<double>(i, "exposure_s", "instrument");
    c.instrument.background_cps = get<double>(i, "background_cps", "instrument");
    c.instrument.collection_efficiency =
        get<double>(i, "collection_efficiency", "instrument");
  }
  {
    const auto& e = j.at("emission");
    c.emission.gs_polarization = get<double>(e, "gs_polarization", "emission");
    c.emission.branch_model.upper_floor =
        get<double>(e, "branch_upper_floor", "emission");
    c.emission.branch_model.lower_floor =
        get<double>(e, "branch_lower_floor", "emission");
    c.emission.branch_model.center_ghz =
        get<double>(e, "branch_center_ghz", "emission");
    c.emission.branch_model.width_ghz =
        get<double>(e, "branch_width_ghz", "emission");
  }
  c.scan = scan_from_json(j.at("scan"), "scan");
  {
    const auto& l = j.at("lock");
    c.lock.name = get<std::string>(l, "profile", "lock");
    c.lock.scan_open = scan_from_json(l.at("scan_open"), "lock.scan_open");
    c.lock.scan_locked = scan_from_json(l.at("scan_locked"), "lock.scan_locked");
    const auto& f = l.at("feedback");
    c.lock.feedback.gain_v_per_bin =
        get<double>(f, "gain_v_per_bin", "lock.feedback");
    c.lock.feedback.integration_n =
        get<int>(f, "integration_n", "lock.feedback");
    c.lock.feedback.target_bin = get<int>(f, "target_bin", "lock.feedback");
    c.lock.feedback.threshold_counts =
        get<double>(f, "threshold_counts", "lock.feedback");
    c.lock.feedback.enabled = get<bool>(f, "enabled", "lock.feedback");
    c.lock.feedback.v_dc_init = get<double>(f, "v_dc_init", "lock.feedback");
    c.lock.feedback.v_dc_min = get<double>(f, "v_dc_min", "lock.feedback");
    c.lock.feedback.v_dc_max = get<double>(f, "v_dc_max", "lock.feedback");
    const auto& d = l.at("diffusion");
    c.lock.diffusion.drift_sigma_mhz =
        get<double>(d, "drift_sigma_mhz_per_sqrt_s", "lock.diffusion");
    c.lock.diffusion.jump_sigma_mhz =
        get<double>(d, "jump_sigma_mhz", "lock.diffusion");
    c.lock.diffusion.reversion_rate =
        get<double>(d, "reversion_rate_per_s", "lock.diffusion");
    c.lock.diffusion.ionization_prob_per_scan =
        get<double>(d, "ionization_prob_per_scan", "lock.diffusion");
    c.lock.diffusion.seed = get<std::uint64_t>(d, "seed", "lock.diffusion");
    const auto& e = l.at("emitter");
    c.lock.emitter.zpl_offset_ghz =
        get<double>(e, "zpl_offset_ghz", "lock.emitter");
    c.lock.emitter.stark_ghz_per_v =
        get<double>(e, "stark_ghz_per_v", "lock.emitter");
    c.lock.emitter.scan_center_ghz =
        get<double>(e, "scan_center_ghz", "lock.emitter");
    c.lock.emitter.laser_freq_ghz =
        get<double>(e, "laser_freq_ghz", "lock.emitter");
  }
  {
    const auto& s = j.at("spectroscopy");
    c.spectroscopy.v_start = get<double>(s, "v_start", "spectroscopy");
    c.spectroscopy.v_stop = get<double>(s, "v_stop", "spectroscopy");
    c.spectroscopy.v_step = get<double>(s, "v_step", "spectroscopy");
    c.spectroscopy.axis_min_ghz = get<double>(s, "axis_min_ghz", "spectroscopy");
    c.spectroscopy.axis_max_ghz = get<double>(s, "axis_max_ghz", "spectroscopy");
    c.spectroscopy.axis_bins = get<int>(s, "axis_bins", "spectroscopy");
    c.spectroscopy.dark_frame_every =
        get<int>(s, "dark_frame_every", "spectroscopy");
  }
  {
    const auto& p = j.at("ple");
    c.ple.v_start = get<double>(p, "v_start", "ple");
    c.ple.v_stop = get<double>(p, "v_stop", "ple");
    c.ple.n_voltages = get<int>(p, "n_voltages", "ple");
    c.ple.position_noise_mhz = get<double>(p, "position_noise_mhz", "ple");
    c.ple.n_lines = get<int>(p, "n_lines", "ple");
  }
  {
    const auto& t = j.at("theta_fit");
    c.theta_fit.theta_true_deg = get<double>(t, "theta_true_deg", "theta_fit");
    c.theta_fit.n_points = get<int>(t, "n_points", "theta_fit");
    c.theta_fit.delta_max_ghz = get<double>(t, "delta_max_ghz", "theta_fit");
    c.theta_fit.noise_frac = get<double>(t, "noise_frac", "theta_fit");
  }
  return c;
}

}  // namespace

void Config::validate() const {
  finestructure.validate();
  starkmap.coefficients.validate();
  instrument.validate();
  scan.validate();
  lock.scan_open.validate();
  lock.scan_locked.validate();
  lock.feedback.validate(lock.scan_locked.n_bins);
  lock.diffusion.validate();
  if (!(emission.gs_polarization >= 0 && emission.gs_polarization <= 1))
    throw std::invalid_argument("config: emission.gs_polarization not in [0,1]");
  if (spectroscopy.axis_bins < 2)
    throw std::invalid_argument("config: spectroscopy.axis_bins must be >= 2");
  if (ple.n_voltages < 4)
    throw std::invalid_argument("config: ple.n_voltages must be >= 4");
  if (theta_fit.n_points < 6)
    throw std::invalid_argument("config: theta_fit.n_points must be >= 6");
}

LockProfile lock_profile_ural() {
  LockProfile p;
  p.name = "ural";
  p.scan_open = {scan::ScanMode::laser_scan, 1.2, 3.0, 1.0, 0.9, 50,
                 60.0, 5000.0, 150.0};
  p.scan_locked = {scan::ScanMode::laser_scan, 0.6, 3.0, 1.0, 0.9, 30,
                   60.0, 5000.0, 150.0};
  // k = stark / bin width = 0.1 / 0.02 = 5 bins per volt; G*k = 0.5
  p.feedback = {0.1, 1, -1, -1.0, true, 0.0, -40.0, 40.0};
  p.diffusion = {10.0, 18.0, 0.05, 0.02, 0};
  p.emitter = {0.0, 0.1, 0.0, 0.0};
  return p;
}

LockProfile lock_profile_nv2() {
  LockProfile p;
  p.name = "nv2";
  p.scan_open = {scan::ScanMode::laser_scan, 6.0, 3.0, 1.0, 0.9, 50,
                 480.0, 8000.0, 150.0};
  p.scan_locked = {scan::ScanMode::laser_scan, 1.5, 3.0, 1.0, 0.9, 30,
                   480.0, 8000.0, 150.0};
  // k = 0.26 / 0.05 = 5.2 bins per volt; G*k ~= 0.6
  p.feedback = {0.115, 2, -1, -1.0, true, 0.0, -40.0, 40.0};
  p.diffusion = {85.0, 210.0, 0.05, 0.02, 0};
  p.emitter = {0.0, 0.26, 0.0, 0.0};
  return p;
}

LockProfile lock_profile_nv2_sweep() {
  LockProfile p;
  p.name = "nv2-sweep";
  p.scan_open = {scan::ScanMode::voltage_sweep, 1.2, 3.0, 0.1, 0.9, 18,
                 480.0, 8000.0, 150.0};
  p.scan_locked = p.scan_open;
  // moving V_DC shifts the in-sweep resonance by -1 V per V: negative gain;
  // |k| = n_bins / span_vpp = 6 bins per volt, |G*k| = 0.5
  p.feedback = {-0.083, 2, -1, -1.0, true, -8.0, -40.0, 40.0};
  p.diffusion = {85.0, 210.0, 0.05, 0.02, 0};
  p.emitter = {0.0, 0.26, 0.0, -8.0 * 0.26};
  return p;
}

LockProfile lock_profile(const std::string& name) {
  if (name == "ural") return lock_profile_ural();
  if (name == "nv2") return lock_profile_nv2();
  if (name == "nv2-sweep") return lock_profile_nv2_sweep();
  throw std::invalid_argument("unknown lock profile '" + name +
                              "' (ural|nv2|nv2-sweep)");
}

Config defaults() {
  Config c;
  // generic PLE scan: used by the ple-map scenario
  c.scan = {scan::ScanMode::laser_scan, 2.0, 3.0, 1.0, 0.9, 50,
            140.0, 5000.0, 150.0};
  c.lock = lock_profile_ural();
  return c;
}

Config from_json_text(const std::string& text) {
  json patch;
  try {
    patch = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: parse error: ") + e.what());
  }
  json base = full_json(defaults());
  merge_checked(base, patch, "");
  Config c = config_from_json(base);
  // profile name may redirect the whole lock section when given alone
  c.validate();
  return c;
}

std::string to_json_text(const Config& cfg) { return full_json(cfg).dump(2) + "\n"; }

Config load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

void save_file(const Config& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("config: cannot write '" + path + "'");
  out << to_json_text(cfg);
}

}  // namespace nvstark::config
