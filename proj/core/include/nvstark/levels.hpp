#pragma once

#include <array>
#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace nvstark::levels {

using Matrix6c = Eigen::Matrix<std::complex<double>, 6, 6>;

// Reference optical frequency for line offsets, in THz (637.25 nm).
inline constexpr double kZplReferenceThz = 470.45;

// Excited-state fine-structure parameters, all in GHz unless noted.
//
// The defaults are calibrated so that, at theta_r = 15 deg, the lower-branch
// spin anticrossings (and hence the two maxima of the spin-altering emission
// fraction) sit near delta_perp = 7 and 15 GHz.
struct FineStructureParams {
  double lambda_z = 5.3;    // axial spin-orbit splitting
  double d_es_par = 1.44;   // axial excited-state spin-spin
  double d_es_perp = 0.78;  // transverse excited-state spin-spin
  double d_gs = 2.88;       // ground-state zero-field splitting D_GS
  double gamma_nat_mhz = 13.0;  // natural linewidth, MHz

  void validate() const;  // throws std::invalid_argument
};

// Ratio of the delta-m = +/-1 transverse spin-spin matrix elements to the
// delta-m = +/-2 ones. Both blocks scale with d_es_perp; this fixed structure
// constant keeps the anticrossing gaps narrow compared to the branch
// splitting (two resolved mixing maxima) while the residual spin mixing far
// from the crossings stays below 1e-3.
inline constexpr double kTransverseMixRatio = 0.03125;

// Electric field seen by the emitter, stored dipole-premultiplied: f_par and
// f_perp are d*F products in GHz, so the Hamiltonian consumes them directly.
// theta_r is the transverse-field angle measured from a C3v reflection plane.
struct ElectricField {
  double f_par = 0.0;        // GHz, uniform shift of all six levels
  double f_perp = 0.0;       // GHz, >= 0; equals delta_perp = d_perp*F_perp
  double theta_r_deg = 0.0;  // degrees, canonical domain [0, 60)

  void validate() const;
};

// Reduce theta to the C3v fundamental domain [0, 60): the spectrum is
// invariant under theta -> theta + 120 and theta -> -theta.
double normalize_theta_deg(double theta_deg);

// Voltage-referred Stark tuning coefficients (GHz per volt on V_a).
struct StarkCoefficients {
  double dd_par_per_volt = 0.42;  // Delta d_par * F_par / V_a
  double d_perp_per_volt = 1.03;  // d_perp * F_perp / V_a, >= 0

  void validate() const;
};

// Linear electrode map (V_1, V_2, V_ref) -> effective-GHz field components,
// plus a static offset field and a fixed transverse angle. Stands in for the
// electrostatic device model.
struct VoltageToFieldMap {
  std::array<double, 3> par_per_volt{0.0, 0.0, 0.0};
  std::array<double, 3> perp_per_volt{0.0, 0.0, 0.0};
  double offset_par = 0.0;
  double offset_perp = 0.0;
  double theta_r_deg = 15.0;
};

enum class Branch { upper, lower };

// One eigenstate of the six-level excited-state Hamiltonian.
// Amplitudes are in the product basis
//   (X,+1), (X,0), (X,-1), (Y,+1), (Y,0), (Y,-1)
// with X/Y the orbital doublet and +1/0/-1 the spin projection.
struct EsLevel {
  double energy_ghz = 0.0;
  std::array<std::complex<double>, 6> amplitudes{};
  double p0 = 0.0;  // summed squared amplitude on m_s = 0
  Branch branch = Branch::upper;
};

// One ZPL line in photon-frequency offset relative to kZplReferenceThz.
struct TransitionLine {
  double frequency_ghz = 0.0;
  double intensity = 0.0;  // relative emission weight, >= 0
  std::string upper_label;  // A2/A1/Ex/Ey/E1/E2 by zero-field energy order
  std::string lower_label;  // "0" or "pm1"
};

// Phenomenological per-branch emission efficiency versus delta_perp. Emulates
// the observed drop of upper-branch (and total) emission as the branches
// separate; neutral defaults leave both branches at weight 1.
struct BranchEmissionModel {
  double upper_floor = 1.0;   // weight the upper branch decays to
  double lower_floor = 1.0;   // weight the lower branch decays to
  double center_ghz = 6.0;    // sigmoid center in delta_perp
  double width_ghz = 1.5;     // sigmoid width

  double upper_weight(double delta_perp_ghz) const;
  double lower_weight(double delta_perp_ghz) const;
};

// H_ES = H_SO + H_SS + H_Stark on the product basis above, in GHz.
//
// Matrix elements (sigma_* act on the orbital doublet, S_* are spin-1):
//   H_SO    = -lambda_z * sigma_y (x) S_z
//   H_SS    =  d_es_par  * I (x) (S_z^2 - 2/3)
//           +  d_es_perp * [sigma_z (x) (S_x^2 - S_y^2) + sigma_x (x) {S_x,S_y}]
//           +  d_es_perp * kTransverseMixRatio *
//                          [sigma_z (x) {S_x,S_z} - sigma_x (x) {S_y,S_z}]
//   H_Stark =  f_par * I
//           +  f_perp * [cos(theta_r) sigma_z - sin(theta_r) sigma_x] (x) I
//
// All terms are C3v covariant: the spectrum is periodic in theta_r with
// period 120 deg and even under theta_r -> -theta_r.
Matrix6c build_hamiltonian(const FineStructureParams& params,
                           const ElectricField& field);

// Diagonalize H (must be Hermitian to 1e-9 relative, else throws) and return
// the six levels sorted by energy, highest first. Branch labels follow the
// dominant orbital weight; exact orbital ties fall back to energy order.
std::vector<EsLevel> eigenlevels(const Matrix6c& hamiltonian);

// Linear orbital shifts of Eq.-style branch energies for a voltage V_a:
//   Delta_Ex = (dd_par + d_perp) * v_a,  Delta_Ey = (dd_par - d_perp) * v_a.
struct OrbitalShifts {
  double delta_ex_ghz = 0.0;
  double delta_ey_ghz = 0.0;
};
OrbitalShifts orbital_shifts(const StarkCoefficients& coeffs, double v_a);

// Emission lines from all six excited levels to ground |0> and |+-1>.
// Excitation occupancy of level i is branch_weight * [P_gs * p0_i +
// (1 - P_gs) * (1 - p0_i)]; emission splits as p0_i to |0> and (1 - p0_i)
// to |+-1>, the latter offset down by D_GS in photon frequency.
std::vector<TransitionLine> transition_lines(
    const std::vector<EsLevel>& levels, const FineStructureParams& params,
    double gs_polarization, double delta_perp_ghz = 0.0,
    const BranchEmissionModel& emission = {});

// Probability that excitation from |0> into the lower branch returns to
// |+-1>: sum_i p0_i (1 - p0_i) over the three lowest levels. When
// `normalized` divides by sum_i p0_i (total emission from the lower branch).
double lambda_emission_fraction(const FineStructureParams& params,
                                double theta_r_deg, double delta_perp_ghz,
                                bool normalized = false);

ElectricField voltage_to_field(const VoltageToFieldMap& map, double v1,
                               double v2, double vref);

// Reorder `levels` so that entry i continues the state previous[i] (maximum
// eigenvector overlap). Used by sweeps to avoid label flapping at crossings.
std::vector<EsLevel> match_to_previous(const std::vector<EsLevel>& previous,
                                       std::vector<EsLevel> levels);

}  // namespace nvstark::levels
