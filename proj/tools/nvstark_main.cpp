// nvstark: scenario runner for the NV Stark-tuning and ZPL-lock toolkit.
// Every scenario reads one JSON config, consumes one seed, and writes CSV/JSON
// plot data plus a manifest; identical inputs give bit-identical outputs.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nvstark/config.hpp"
#include "nvstark/feedback.hpp"
#include "nvstark/io.hpp"
#include "nvstark/levels.hpp"
#include "nvstark/rng.hpp"
#include "nvstark/scan.hpp"
#include "nvstark/spectra.hpp"

namespace fs = std::filesystem;
using namespace nvstark;

namespace {

const std::vector<std::string> kScenarios{"levels-sweep", "emission-map",
                                          "ple-map", "lock-run", "theta-fit"};

struct RunContext {
  config::Config cfg;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  fs::path out;
  std::vector<fs::path> artifacts;
};

levels::ElectricField emission_field(const config::Config& cfg, double v_a) {
  return {cfg.starkmap.coefficients.dd_par_per_volt * v_a,
          cfg.starkmap.coefficients.d_perp_per_volt * v_a,
          cfg.starkmap.theta_r_deg};
}

void finish(RunContext& ctx, const std::string& scenario) {
  io::write_manifest(ctx.out, scenario, ctx.config_hash, ctx.seed,
                     ctx.artifacts);
  std::cout << scenario << ": wrote " << ctx.artifacts.size() + 1
            << " files to " << ctx.out.string() << "\n";
}

void run_levels_sweep(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  std::vector<io::LevelSweepRow> rows;
  std::vector<levels::EsLevel> prev;
  for (double v = cfg.spectroscopy.v_start; v <= cfg.spectroscopy.v_stop + 1e-9;
       v += cfg.spectroscopy.v_step) {
    auto lv = levels::eigenlevels(
        levels::build_hamiltonian(cfg.finestructure, emission_field(cfg, v)));
    if (!prev.empty()) lv = levels::match_to_previous(prev, lv);
    io::LevelSweepRow row;
    row.v_a = v;
    for (int k = 0; k < 6; ++k) {
      row.energies_ghz[k] = lv[k].energy_ghz;
      row.p0[k] = lv[k].p0;
    }
    rows.push_back(row);
    prev = std::move(lv);
  }
  const fs::path file = ctx.out / "levels_sweep.csv";
  io::write_level_sweep_csv(file, rows);
  ctx.artifacts.push_back(file);
}

void run_emission_map(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  const auto& sp = cfg.spectroscopy;
  std::vector<double> axis(sp.axis_bins);
  const double step = (sp.axis_max_ghz - sp.axis_min_ghz) / sp.axis_bins;
  for (int i = 0; i < sp.axis_bins; ++i)
    axis[i] = sp.axis_min_ghz + (i + 0.5) * step;

  fs::create_directories(ctx.out / "spectra");
  std::ofstream summary(ctx.out / "emission_summary.csv");
  summary << std::setprecision(12)
          << "v_a,delta_perp_ghz,total_rate_cps,total_rate_err,"
             "lambda_rel_intensity\n";

  spectra::PolarizationBound low_field_bound;
  bool have_bound = false;

  int frame = 0;
  for (double v = sp.v_start; v <= sp.v_stop + 1e-9; v += sp.v_step, ++frame) {
    const auto field = emission_field(cfg, v);
    const bool dark =
        sp.dark_frame_every > 0 && frame % sp.dark_frame_every == sp.dark_frame_every - 1;
    const auto lv =
        levels::eigenlevels(levels::build_hamiltonian(cfg.finestructure, field));
    const auto lines =
        levels::transition_lines(lv, cfg.finestructure, cfg.emission.gs_polarization,
                                 field.f_perp, cfg.emission.branch_model);
    auto spec = spectra::render_emission_spectrum(
        lines, cfg.instrument, axis, mix_seed(ctx.seed, frame), dark);
    spec.meta.voltage = v;
    spec.meta.timestamp_s = 60.0 * frame;

    char name[64];
    std::snprintf(name, sizeof(name), "spectra/spectrum_%03d.csv", frame);
    const fs::path file = ctx.out / name;
    io::write_spectrum_csv(file, spec);
    io::write_spectrum_sidecar(fs::path(file).replace_extension(".json"), spec);
    ctx.artifacts.push_back(file);

    if (dark) continue;

    // strongest line drives the reference fit for rate and bound estimates
    std::vector<double> y(spec.counts.begin(), spec.counts.end());
    fitting::PeakFit ref;
    try {
      ref = fitting::fit_peak(axis, y, fitting::Profile::gaussian);
    } catch (const std::invalid_argument&) {
      continue;
    }
    const auto rate = spectra::total_zpl_rate(spec, std::vector{ref});
    const double lam = levels::lambda_emission_fraction(
        cfg.finestructure, field.theta_r_deg, field.f_perp, true);
    summary << v << ',' << field.f_perp << ',' << rate.rate_cps << ','
            << rate.err_cps << ',' << lam << '\n';

    if (!have_bound && ref.converged && field.f_perp < 2.0) {
      // A2 -> |pm1> would sit D_GS below the A2 -> |0> line
      double a2_freq = 0.0;
      for (const auto& l : lines)
        if (l.upper_label == "A2" && l.lower_label == "pm1")
          a2_freq = l.frequency_ghz;
      if (a2_freq - 1.5 * ref.fwhm > axis.front() &&
          a2_freq + 1.5 * ref.fwhm < axis.back()) {
        low_field_bound = spectra::gs_polarization_bound(spec, a2_freq, ref);
        have_bound = true;
      }
    }
  }
  summary.close();
  ctx.artifacts.push_back(ctx.out / "emission_summary.csv");

  if (have_bound) {
    nlohmann::json j{{"gs_polarization_bound", low_field_bound.bound},
                     {"unbounded", low_field_bound.unbounded},
                     {"a2_area_limit", low_field_bound.a2_area_limit},
                     {"reference_area", low_field_bound.reference_area}};
    io::write_text_file(ctx.out / "gs_bound.json", j.dump(2) + "\n");
    ctx.artifacts.push_back(ctx.out / "gs_bound.json");
  }
}

void run_ple_map(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  const auto& ple = cfg.ple;

  // PLE excitation lines through the electrode map (V_a on V_1 and V_ref)
  auto lines_at = [&](double v_a) {
    const auto field = levels::voltage_to_field(cfg.voltage_map, v_a, 0.0, v_a);
    const auto lv =
        levels::eigenlevels(levels::build_hamiltonian(cfg.finestructure, field));
    // microwaves keep both ground manifolds populated: lines from |0> at E_i
    // weighted p0 and from |pm1> at E_i - D_GS weighted (1 - p0)
    std::vector<std::pair<double, double>> out;  // (freq, strength)
    for (const auto& s : lv) {
      out.push_back({s.energy_ghz, 0.5 * s.p0});
      out.push_back({s.energy_ghz - cfg.finestructure.d_gs, 0.5 * (1.0 - s.p0)});
    }
    return out;
  };

  // the n strongest lines at the highest voltage (well separated there)
  // seed the tracked families; the sweep then walks down in voltage with a
  // linear prediction centering each scan window
  auto seed_lines = lines_at(ple.v_stop);
  std::sort(seed_lines.begin(), seed_lines.end(),
            [](auto& a, auto& b) { return a.second > b.second; });
  seed_lines.resize(std::min<std::size_t>(ple.n_lines, seed_lines.size()));
  const std::size_t nfam = seed_lines.size();

  const scan::ScanConfig& scan_cfg = cfg.scan;
  const diffusion::DiffusionParams quiet{0.0, 0.0, 0.0, 0.0, 0};

  struct Track {
    double pos = 0.0, slope = 0.0, v_last = 0.0;
  };
  std::vector<Track> track(nfam);
  for (std::size_t f = 0; f < nfam; ++f)
    track[f] = {seed_lines[f].first, 0.0, ple.v_stop};

  std::mt19937_64 noise_rng = make_rng(ctx.seed, 17);
  std::normal_distribution<double> jitter(0.0, ple.position_noise_mhz * 1e-3);

  std::vector<double> voltages;                 // descending
  std::vector<std::vector<double>> frames;      // fitted positions per frame
  for (int i = ple.n_voltages - 1; i >= 0; --i) {
    const double v_a =
        ple.v_start + (ple.v_stop - ple.v_start) * i / (ple.n_voltages - 1);
    const auto all = lines_at(v_a);
    std::vector<double> frame;
    for (std::size_t f = 0; f < nfam; ++f) {
      const double pred =
          track[f].pos + track[f].slope * (v_a - track[f].v_last);
      double best = 1e18, truth = 0.0;
      for (const auto& [freq, w] : all) {
        if (w < 0.02) continue;
        if (std::abs(freq - pred) < best) {
          best = std::abs(freq - pred);
          truth = freq;
        }
      }
      scan::EmitterModel em;
      em.zpl_offset_ghz = truth + jitter(noise_rng);
      em.scan_center_ghz = pred;
      em.stark_ghz_per_v = 0.0;
      diffusion::DiffusionState state{0.0, true, 0.0};
      auto traj = make_rng(ctx.seed, 1000 + i * 16 + f);
      auto photon = make_rng(ctx.seed, 2000 + i * 16 + f);
      const auto rec =
          scan::run_scan(scan_cfg, em, state, quiet, 0.0, i, traj, photon);
      std::vector<double> y(rec.bin_counts.begin(), rec.bin_counts.end());
      try {
        const auto fit =
            fitting::fit_peak(rec.bin_axis, y, fitting::Profile::lorentzian);
        if (fit.converged) {
          const double freq = pred + fit.center;
          frame.push_back(freq);
          if (v_a != track[f].v_last)
            track[f].slope = (freq - track[f].pos) / (v_a - track[f].v_last);
          track[f].pos = freq;
          track[f].v_last = v_a;
        }
      } catch (const std::invalid_argument&) {
      }
    }
    voltages.push_back(v_a);
    frames.push_back(std::move(frame));
  }

  // family association runs on the bare positions (the tracker above only
  // centered the scan windows)
  const auto points = fitting::associate_families(voltages, frames);
  std::ofstream pos_csv(ctx.out / "ple_positions.csv");
  pos_csv << std::setprecision(12) << "v_a,family,freq_ghz\n";
  for (const auto& p : points)
    pos_csv << p.v_a << ',' << p.family << ',' << p.freq_ghz << '\n';
  pos_csv.close();
  ctx.artifacts.push_back(ctx.out / "ple_positions.csv");

  nlohmann::json j;
  try {
    const auto model_fit = fitting::fit_stark_hamiltonian(
        points, cfg.finestructure, cfg.voltage_map.theta_r_deg);
    j["hamiltonian_fit"] = {
        {"dd_par_per_volt", model_fit.dd_par_per_volt.value},
        {"dd_par_stderr", model_fit.dd_par_per_volt.stderr_},
        {"d_perp_per_volt", model_fit.d_perp_per_volt.value},
        {"d_perp_stderr", model_fit.d_perp_per_volt.stderr_},
        {"residual_rms_ghz", model_fit.residual_rms}};
  } catch (const std::invalid_argument& e) {
    j["hamiltonian_fit"] = {{"error", e.what()}};
  }
  try {
    const auto lin = fitting::fit_stark_positions(points);
    j["linear_fit"] = {{"dd_par_per_volt", lin.dd_par_per_volt.value},
                       {"dd_par_stderr", lin.dd_par_per_volt.stderr_},
                       {"d_perp_per_volt", lin.d_perp_per_volt.value},
                       {"d_perp_stderr", lin.d_perp_per_volt.stderr_},
                       {"residual_rms_ghz", lin.residual_rms},
                       {"zero_field_offsets_ghz", lin.zero_field_offsets},
                       {"family_branch_sign", lin.family_branch_sign}};
  } catch (const std::invalid_argument& e) {
    j["linear_fit"] = {{"error", e.what()}};
  }
  io::write_text_file(ctx.out / "stark_fit.json", j.dump(2) + "\n");
  ctx.artifacts.push_back(ctx.out / "stark_fit.json");
}

void run_lock_run(RunContext& ctx, bool feedback_on, double duration_s) {
  const auto& profile = ctx.cfg.lock;
  auto fb = profile.feedback;
  fb.enabled = feedback_on;
  const auto& scan_cfg = feedback_on ? profile.scan_locked : profile.scan_open;

  const auto res = feedback::run_locked_experiment(
      scan_cfg, fb, profile.diffusion, profile.emitter, duration_s, ctx.seed);

  io::write_scan_log_csv(ctx.out / "scan_log.csv", res.records);
  io::write_peaks_csv(ctx.out / "peaks.csv", res.fits);
  io::write_metrics_json(ctx.out / "metrics.json", res.metrics);
  std::vector<io::TrajectorySample> samples;
  samples.reserve(res.trajectory.size());
  for (const auto& t : res.trajectory)
    samples.push_back({t.time_s, t.detuning_mhz, t.bright});
  io::write_trajectory_csv(ctx.out / "trajectory.csv", samples);
  for (const char* f : {"scan_log.csv", "peaks.csv", "metrics.json",
                        "trajectory.csv"})
    ctx.artifacts.push_back(ctx.out / f);
}

void run_theta_fit(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  const auto& tf = cfg.theta_fit;

  std::mt19937_64 rng = make_rng(ctx.seed, 3);
  std::vector<fitting::ThetaPoint> data;
  double ymax = 0.0;
  for (int i = 0; i < tf.n_points; ++i) {
    const double d = 0.5 + (tf.delta_max_ghz - 0.5) * i / (tf.n_points - 1);
    const double y = levels::lambda_emission_fraction(cfg.finestructure,
                                                      tf.theta_true_deg, d);
    ymax = std::max(ymax, y);
    data.push_back({d, y});
  }
  std::normal_distribution<double> noise(0.0, tf.noise_frac * ymax);
  for (auto& p : data) p.intensity += noise(rng);

  std::ofstream curve(ctx.out / "theta_curve.csv");
  curve << std::setprecision(12) << "delta_perp_ghz,intensity\n";
  for (const auto& p : data) curve << p.delta_perp_ghz << ',' << p.intensity << '\n';
  curve.close();
  ctx.artifacts.push_back(ctx.out / "theta_curve.csv");

  const auto fit = fitting::fit_theta_r(data, cfg.finestructure);
  nlohmann::json j{{"theta_r_deg", fit.theta_r_deg.value},
                   {"theta_r_stderr_deg", fit.theta_r_deg.stderr_},
                   {"theta_true_deg", tf.theta_true_deg},
                   {"well_conditioned", fit.well_conditioned},
                   {"residual_rms", fit.residual_rms}};
  io::write_text_file(ctx.out / "theta_fit.json", j.dump(2) + "\n");
  ctx.artifacts.push_back(ctx.out / "theta_fit.json");
}

int dispatch(const std::string& scenario, RunContext& ctx, bool feedback_on,
             double duration_s) {
  fs::create_directories(ctx.out);
  if (scenario == "levels-sweep")
    run_levels_sweep(ctx);
  else if (scenario == "emission-map")
    run_emission_map(ctx);
  else if (scenario == "ple-map")
    run_ple_map(ctx);
  else if (scenario == "lock-run")
    run_lock_run(ctx, feedback_on, duration_s);
  else if (scenario == "theta-fit")
    run_theta_fit(ctx);
  else {
    std::cerr << "unknown scenario '" << scenario << "'; available:";
    for (const auto& s : kScenarios) std::cerr << ' ' << s;
    std::cerr << "\n";
    return 2;
  }
  finish(ctx, scenario);
  return 0;
}

config::Config load_config(const std::string& path_flag) {
  if (!path_flag.empty()) return config::load_file(path_flag);
  if (const char* env = std::getenv(config::kConfigEnvVar);
      env && *env != '\0')
    return config::load_file(env);
  return config::defaults();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NV Stark tuning and ZPL stabilization toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", scenario, feedback_str = "on";
  std::uint64_t seed = 0;
  double duration_s = 280.0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--seed", seed, "master seed");
    sub->add_option("--out", out_dir, "output directory");
  };

  CLI::App* run = app.add_subcommand("run", "run a named scenario");
  add_common(run);
  run->add_option("--scenario", scenario, "scenario name")->required();
  run->add_option("--feedback", feedback_str, "on|off (lock-run)");
  run->add_option("--duration", duration_s, "seconds (lock-run)");

  CLI::App* lock = app.add_subcommand("simulate-lock", "closed-loop lock run");
  add_common(lock);
  lock->add_option("--feedback", feedback_str, "on|off");
  lock->add_option("--duration", duration_s, "seconds");

  CLI11_PARSE(app, argc, argv);

  if (feedback_str != "on" && feedback_str != "off") {
    std::cerr << "--feedback must be on or off\n";
    return 2;
  }

  RunContext ctx;
  try {
    ctx.cfg = load_config(config_path);
    ctx.config_hash = io::fnv1a64(config::to_json_text(ctx.cfg));
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  ctx.seed = seed;
  ctx.out = out_dir;

  const std::string name =
      app.got_subcommand("simulate-lock") ? "lock-run" : scenario;
  try {
    return dispatch(name, ctx, feedback_str == "on", duration_s);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
