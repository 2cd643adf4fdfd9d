#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "nvstark/levels.hpp"

namespace nvstark::fitting {

enum class Profile { lorentzian, gaussian };

// Four-parameter line fit: center, fwhm, amplitude (peak height above
// offset), offset. Covariance order matches.
struct PeakFit {
  double center = 0.0;
  double fwhm = 0.0;
  double amplitude = 0.0;
  double offset = 0.0;
  Eigen::Matrix4d covariance = Eigen::Matrix4d::Zero();
  bool converged = false;
  int iterations = 0;
  double residual_rms = 0.0;

  double center_stderr() const { return std::sqrt(covariance(0, 0)); }
};

// Profile value and analytic gradient wrt (center, fwhm, amplitude, offset).
double profile_value(Profile p, const std::array<double, 4>& params, double x);
std::array<double, 4> profile_gradient(Profile p,
                                       const std::array<double, 4>& params,
                                       double x);

// Damped (Levenberg-style) weighted least squares over the 4-parameter
// profile. Weights are Poisson, 1/max(y, 1). Converges when the relative
// objective decrease drops below 1e-10 or the step norm below 1e-8, with at
// most 200 iterations; on non-convergence the best iterate is returned with
// converged = false. Throws std::invalid_argument for degenerate (flat or
// too-short) data.
PeakFit fit_peak(std::span<const double> x, std::span<const double> y,
                 Profile profile, std::optional<PeakFit> init = std::nullopt);

struct ValueWithError {
  double value = 0.0;
  double stderr_ = 0.0;
};

struct StarkFitResult {
  ValueWithError dd_par_per_volt;
  ValueWithError d_perp_per_volt;
  ValueWithError theta_r_deg;               // filled by fit_theta_r only
  std::vector<double> zero_field_offsets;   // GHz, one per line family
  std::vector<int> family_branch_sign;      // +1 upper branch, -1 lower
  double residual_rms = 0.0;                // GHz
  bool well_conditioned = true;
};

struct StarkPoint {
  double v_a = 0.0;        // applied voltage
  double freq_ghz = 0.0;   // fitted line position
  int family = 0;          // line-family id, contiguous from 0
};

// Global linear fit of line positions versus voltage: shared coefficients
// (dd_par, d_perp), a per-family zero-field offset, and a per-family branch
// sign inferred from the tuning slope. Requires at least two families on
// opposite branches and at least four voltages; otherwise throws with the
// name of the unidentifiable parameter.
StarkFitResult fit_stark_positions(std::span<const StarkPoint> data);

// Full-Hamiltonian variant of the global Stark fit: positions are matched to
// the nearest predicted line of the six-level model (both ground manifolds)
// while (dd_par, d_perp) and a common frequency offset float. Handles the
// curved low-voltage tuning that the linear form cannot. Family ids in the
// input are ignored; theta_r is held fixed.
StarkFitResult fit_stark_hamiltonian(std::span<const StarkPoint> data,
                                     const levels::FineStructureParams& params,
                                     double theta_r_deg);

struct ThetaPoint {
  double delta_perp_ghz = 0.0;
  double intensity = 0.0;  // relative Lambda-line intensity
};

// 1-D least squares for theta_r over [0, 60) with the overall scale profiled
// out analytically; the model curve is lambda_emission_fraction. Standard
// error from the objective curvature. Sets well_conditioned = false when the
// data do not span an anticrossing.
StarkFitResult fit_theta_r(std::span<const ThetaPoint> data,
                           const levels::FineStructureParams& params,
                           bool normalized = false);

// Track fitted peaks into line families across voltage frames by
// nearest-prediction: each family extrapolates its last position with its
// running slope and claims the closest unassigned peak. Family count is set
// by the first frame.
std::vector<StarkPoint> associate_families(
    std::span<const double> voltages,
    std::span<const std::vector<double>> frames);

}  // namespace nvstark::fitting
