#include "nvstark/diffusion.hpp"

#include <cmath>
#include <stdexcept>

namespace nvstark::diffusion {

void DiffusionParams::validate() const {
  if (!(drift_sigma_mhz >= 0) || !(jump_sigma_mhz >= 0) ||
      !(reversion_rate >= 0))
    throw std::invalid_argument("diffusion parameters must be >= 0");
  if (!(ionization_prob_per_scan >= 0.0 && ionization_prob_per_scan <= 1.0))
    throw std::invalid_argument("ionization_prob_per_scan must be in [0, 1]");
}

double DiffusionParams::stationary_sigma_mhz() const {
  if (reversion_rate <= 0) return std::numeric_limits<double>::infinity();
  return drift_sigma_mhz / std::sqrt(2.0 * reversion_rate);
}

DiffusionState evolve(const DiffusionState& state, const DiffusionParams& params,
                      double dt_s, std::mt19937_64& rng) {
  params.validate();
  if (!(dt_s > 0)) throw std::invalid_argument("evolve: dt must be > 0");

  std::normal_distribution<double> gauss(0.0, 1.0);
  DiffusionState next = state;
  const double r = params.reversion_rate;
  if (r > 0) {
    const double decay = std::exp(-r * dt_s);
    const double innov =
        params.drift_sigma_mhz * std::sqrt((1.0 - decay * decay) / (2.0 * r));
    next.detuning_mhz = decay * state.detuning_mhz + innov * gauss(rng);
  } else {
    next.detuning_mhz =
        state.detuning_mhz + params.drift_sigma_mhz * std::sqrt(dt_s) * gauss(rng);
  }
  next.time_s = state.time_s + dt_s;
  return next;
}

DiffusionState apply_repump(const DiffusionState& state,
                            const DiffusionParams& params,
                            std::mt19937_64& rng) {
  params.validate();
  std::normal_distribution<double> gauss(0.0, 1.0);
  DiffusionState next = state;
  next.charge_bright = true;
  next.detuning_mhz += params.jump_sigma_mhz * gauss(rng);
  return next;
}

DiffusionState maybe_ionize(const DiffusionState& state,
                            const DiffusionParams& params,
                            std::mt19937_64& rng) {
  params.validate();
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  DiffusionState next = state;
  if (uni(rng) < params.ionization_prob_per_scan) next.charge_bright = false;
  return next;
}

}  // namespace nvstark::diffusion
