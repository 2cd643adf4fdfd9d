#pragma once

#include <cstdint>
#include <random>

#include "nvstark/rng.hpp"

namespace nvstark::diffusion {

// Spectral-diffusion model: mean-reverting Gaussian drift between repumps,
// an instantaneous Gaussian jump at every repump, and per-scan Bernoulli
// photoionization. reversion_rate = 0 recovers a pure random walk.
struct DiffusionParams {
  double drift_sigma_mhz = 0.0;     // MHz per sqrt(s)
  double jump_sigma_mhz = 0.0;      // MHz per repump pulse
  double reversion_rate = 0.0;      // 1/s
  double ionization_prob_per_scan = 0.0;
  std::uint64_t seed = 0;

  void validate() const;  // throws std::invalid_argument

  // stationary detuning std of the drift alone (reversion_rate > 0)
  double stationary_sigma_mhz() const;
};

struct DiffusionState {
  double detuning_mhz = 0.0;
  bool charge_bright = true;
  double time_s = 0.0;
};

// Advance the drift by dt. The Ornstein-Uhlenbeck transition is exact:
//   d <- exp(-r dt) d + drift_sigma * sqrt((1 - exp(-2 r dt)) / (2 r)) * xi
// reducing to d + drift_sigma*sqrt(dt)*xi as r -> 0. Charge is unchanged.
DiffusionState evolve(const DiffusionState& state, const DiffusionParams& params,
                      double dt_s, std::mt19937_64& rng);

// Repump pulse: restores the bright charge state and kicks the detuning by
// a Gaussian of std jump_sigma.
DiffusionState apply_repump(const DiffusionState& state,
                            const DiffusionParams& params,
                            std::mt19937_64& rng);

// Bernoulli photoionization with ionization_prob_per_scan.
DiffusionState maybe_ionize(const DiffusionState& state,
                            const DiffusionParams& params,
                            std::mt19937_64& rng);

// One seeded trajectory: owns the RNG stream derived from params.seed so a
// full path is reproducible from (initial state, params).
class Trajectory {
 public:
  Trajectory(DiffusionState initial, DiffusionParams params)
      : state_(initial), params_(params), rng_(make_rng(params.seed)) {}

  const DiffusionState& state() const { return state_; }
  void evolve(double dt_s) { state_ = diffusion::evolve(state_, params_, dt_s, rng_); }
  void repump() { state_ = apply_repump(state_, params_, rng_); }
  void maybe_ionize() { state_ = diffusion::maybe_ionize(state_, params_, rng_); }

 private:
  DiffusionState state_;
  DiffusionParams params_;
  std::mt19937_64 rng_;
};

}  // namespace nvstark::diffusion
