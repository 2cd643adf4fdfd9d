#include "nvstark/levels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace nvstark::levels {

namespace {

using Matrix2c = Eigen::Matrix<std::complex<double>, 2, 2>;
using Matrix3c = Eigen::Matrix<std::complex<double>, 3, 3>;
using cd = std::complex<double>;

constexpr cd kI{0.0, 1.0};

Matrix2c pauli_x() {
  Matrix2c m;
  m << 0, 1, 1, 0;
  return m;
}

Matrix2c pauli_y() {
  Matrix2c m;
  m << 0, -kI, kI, 0;
  return m;
}

Matrix2c pauli_z() {
  Matrix2c m;
  m << 1, 0, 0, -1;
  return m;
}

// spin-1 operators in the basis (+1, 0, -1)
Matrix3c spin_x() {
  Matrix3c m;
  const double r = 1.0 / std::sqrt(2.0);
  m << 0, r, 0, r, 0, r, 0, r, 0;
  return m;
}

Matrix3c spin_y() {
  Matrix3c m;
  const cd r = kI / std::sqrt(2.0);
  m << 0, -r, 0, r, 0, -r, 0, r, 0;
  return m;
}

Matrix3c spin_z() {
  Matrix3c m;
  m << 1, 0, 0, 0, 0, 0, 0, 0, -1;
  return m;
}

Matrix6c kron(const Matrix2c& orb, const Matrix3c& spin) {
  Matrix6c out;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      out.block<3, 3>(3 * i, 3 * j) = orb(i, j) * spin;
  return out;
}

Matrix3c anticomm(const Matrix3c& a, const Matrix3c& b) {
  return a * b + b * a;
}

void require_finite(double v, const char* name) {
  if (!std::isfinite(v))
    throw std::invalid_argument(std::string(name) + " must be finite");
}

}  // namespace

void FineStructureParams::validate() const {
  require_finite(lambda_z, "lambda_z");
  require_finite(d_es_par, "d_es_par");
  require_finite(d_es_perp, "d_es_perp");
  require_finite(d_gs, "d_gs");
  require_finite(gamma_nat_mhz, "gamma_nat_mhz");
  if (lambda_z < 0 || d_es_par < 0 || d_es_perp < 0)
    throw std::invalid_argument("fine-structure splittings must be >= 0");
  if (d_gs <= 0) throw std::invalid_argument("d_gs must be > 0");
  if (gamma_nat_mhz <= 0)
    throw std::invalid_argument("gamma_nat_mhz must be > 0");
}

void ElectricField::validate() const {
  require_finite(f_par, "f_par");
  require_finite(f_perp, "f_perp");
  require_finite(theta_r_deg, "theta_r_deg");
  if (f_perp < 0) throw std::invalid_argument("f_perp must be >= 0");
}

void StarkCoefficients::validate() const {
  require_finite(dd_par_per_volt, "dd_par_per_volt");
  require_finite(d_perp_per_volt, "d_perp_per_volt");
  if (d_perp_per_volt < 0)
    throw std::invalid_argument("d_perp_per_volt must be >= 0");
}

double normalize_theta_deg(double theta_deg) {
  // period 120, then mirror the upper half of [0, 120) back onto [0, 60)
  double t = std::fmod(theta_deg, 120.0);
  if (t < 0) t += 120.0;
  if (t >= 60.0) t = 120.0 - t;
  // fmod can land exactly on 120 - eps -> t == 60 after mirror of t slightly
  if (t >= 60.0) t = 0.0;
  return t;
}

double BranchEmissionModel::upper_weight(double delta_perp_ghz) const {
  const double s = 1.0 / (1.0 + std::exp(-(delta_perp_ghz - center_ghz) / width_ghz));
  return 1.0 + (upper_floor - 1.0) * s;
}

double BranchEmissionModel::lower_weight(double delta_perp_ghz) const {
  const double s = 1.0 / (1.0 + std::exp(-(delta_perp_ghz - center_ghz) / width_ghz));
  return 1.0 + (lower_floor - 1.0) * s;
}

Matrix6c build_hamiltonian(const FineStructureParams& params,
                           const ElectricField& field) {
  params.validate();
  field.validate();

  const Matrix2c sx = pauli_x(), sy = pauli_y(), sz = pauli_z();
  const Matrix2c i2 = Matrix2c::Identity();
  const Matrix3c Sx = spin_x(), Sy = spin_y(), Sz = spin_z();
  const Matrix3c i3 = Matrix3c::Identity();

  Matrix6c h = Matrix6c::Zero();

  // axial spin-orbit
  h += -params.lambda_z * kron(sy, Sz);

  // axial spin-spin
  h += params.d_es_par * kron(i2, (Sz * Sz - (2.0 / 3.0) * i3).eval());

  // transverse spin-spin, delta-m = 2 block
  h += params.d_es_perp *
       (kron(sz, (Sx * Sx - Sy * Sy).eval()) + kron(sx, anticomm(Sx, Sy)));

  // transverse spin-spin, delta-m = 1 block (the anticrossing coupling)
  h += params.d_es_perp * kTransverseMixRatio *
       (kron(sz, anticomm(Sx, Sz)) - kron(sx, anticomm(Sy, Sz)));

  // Stark: uniform longitudinal shift + orbital splitting at angle theta_r
  const double th = field.theta_r_deg * M_PI / 180.0;
  h += field.f_par * Matrix6c::Identity();
  h += field.f_perp * (std::cos(th) * kron(sz, i3) - std::sin(th) * kron(sx, i3));

  return h;
}

std::vector<EsLevel> eigenlevels(const Matrix6c& hamiltonian) {
  const double scale = std::max(1.0, hamiltonian.norm());
  if ((hamiltonian - hamiltonian.adjoint()).norm() > 1e-9 * scale)
    throw std::invalid_argument("eigenlevels: matrix is not Hermitian");

  Eigen::SelfAdjointEigenSolver<Matrix6c> solver(hamiltonian);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("eigenlevels: eigensolver failed");

  std::vector<EsLevel> out(6);
  for (int k = 0; k < 6; ++k) {
    // SelfAdjointEigenSolver sorts ascending; we want descending
    const int src = 5 - k;
    EsLevel& lv = out[k];
    lv.energy_ghz = solver.eigenvalues()(src);
    double x_weight = 0.0;
    for (int i = 0; i < 6; ++i) {
      lv.amplitudes[i] = solver.eigenvectors()(i, src);
      if (i < 3) x_weight += std::norm(lv.amplitudes[i]);
    }
    lv.p0 = std::norm(lv.amplitudes[1]) + std::norm(lv.amplitudes[4]);
    lv.branch = x_weight >= 0.5 ? Branch::upper : Branch::lower;
  }

  // degenerate orbital weights (zero transverse field): label by energy order
  int uppers = 0;
  for (const auto& lv : out)
    if (lv.branch == Branch::upper) ++uppers;
  if (uppers != 3)
    for (int k = 0; k < 6; ++k) out[k].branch = k < 3 ? Branch::upper : Branch::lower;

  return out;
}

OrbitalShifts orbital_shifts(const StarkCoefficients& coeffs, double v_a) {
  coeffs.validate();
  require_finite(v_a, "v_a");
  return {(coeffs.dd_par_per_volt + coeffs.d_perp_per_volt) * v_a,
          (coeffs.dd_par_per_volt - coeffs.d_perp_per_volt) * v_a};
}

std::vector<TransitionLine> transition_lines(
    const std::vector<EsLevel>& levels, const FineStructureParams& params,
    double gs_polarization, double delta_perp_ghz,
    const BranchEmissionModel& emission) {
  params.validate();
  if (gs_polarization < 0.0 || gs_polarization > 1.0)
    throw std::invalid_argument("gs_polarization must be in [0, 1]");

  static const char* kLabels[6] = {"A2", "A1", "Ex", "Ey", "E1", "E2"};
  std::vector<TransitionLine> lines;
  lines.reserve(2 * levels.size());
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const EsLevel& lv = levels[i];
    const double w_branch = lv.branch == Branch::upper
                                ? emission.upper_weight(delta_perp_ghz)
                                : emission.lower_weight(delta_perp_ghz);
    const double occupancy =
        w_branch * (gs_polarization * lv.p0 +
                    (1.0 - gs_polarization) * (1.0 - lv.p0));
    const char* label = i < 6 ? kLabels[i] : "?";
    lines.push_back({lv.energy_ghz, occupancy * lv.p0, label, "0"});
    lines.push_back({lv.energy_ghz - params.d_gs, occupancy * (1.0 - lv.p0),
                     label, "pm1"});
  }
  return lines;
}

double lambda_emission_fraction(const FineStructureParams& params,
                                double theta_r_deg, double delta_perp_ghz,
                                bool normalized) {
  if (delta_perp_ghz < 0)
    throw std::invalid_argument("delta_perp_ghz must be >= 0");
  const ElectricField field{0.0, delta_perp_ghz,
                            normalize_theta_deg(theta_r_deg)};
  const auto lv = eigenlevels(build_hamiltonian(params, field));
  // three lowest-energy states form the lower branch
  double sum = 0.0, total = 0.0;
  for (int k = 3; k < 6; ++k) {
    sum += lv[k].p0 * (1.0 - lv[k].p0);
    total += lv[k].p0;
  }
  if (!normalized) return sum;
  return total > 1e-12 ? sum / total : 0.0;
}

ElectricField voltage_to_field(const VoltageToFieldMap& map, double v1,
                               double v2, double vref) {
  const std::array<double, 3> v{v1, v2, vref};
  double f_par = map.offset_par;
  double f_perp = map.offset_perp;
  for (int i = 0; i < 3; ++i) {
    f_par += map.par_per_volt[i] * v[i];
    f_perp += map.perp_per_volt[i] * v[i];
  }
  double theta = map.theta_r_deg;
  if (f_perp < 0) {  // negative transverse field == rotate by 60 deg
    f_perp = -f_perp;
    theta += 60.0;
  }
  return {f_par, f_perp, normalize_theta_deg(theta)};
}

std::vector<EsLevel> match_to_previous(const std::vector<EsLevel>& previous,
                                       std::vector<EsLevel> levels) {
  if (previous.size() != levels.size()) return levels;
  const std::size_t n = levels.size();
  std::vector<EsLevel> out(n);
  std::vector<bool> used(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    double best = -1.0;
    std::size_t pick = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (used[j]) continue;
      cd overlap{0.0, 0.0};
      for (int a = 0; a < 6; ++a)
        overlap += std::conj(previous[i].amplitudes[a]) * levels[j].amplitudes[a];
      const double w = std::abs(overlap);
      if (w > best) {
        best = w;
        pick = j;
      }
    }
    used[pick] = true;
    out[i] = std::move(levels[pick]);
  }
  return out;
}

}  // namespace nvstark::levels
