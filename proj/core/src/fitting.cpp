#include "nvstark/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

namespace nvstark::fitting {

namespace {

constexpr double kGaussFwhmToSigma = 0.42466090014400953;  // 1/(2 sqrt(2 ln 2))

struct LmOptions {
  int max_iterations = 200;
  double objective_tol = 1e-10;
  double step_tol = 1e-8;
};

double poisson_weight(double y) { return 1.0 / std::max(y, 1.0); }

}  // namespace

double profile_value(Profile p, const std::array<double, 4>& q, double x) {
  const double c = q[0], fwhm = q[1], a = q[2], off = q[3];
  const double dx = x - c;
  if (p == Profile::lorentzian) {
    const double h = 0.5 * fwhm;
    return off + a * h * h / (dx * dx + h * h);
  }
  const double s = fwhm * kGaussFwhmToSigma;
  return off + a * std::exp(-0.5 * dx * dx / (s * s));
}

std::array<double, 4> profile_gradient(Profile p,
                                       const std::array<double, 4>& q,
                                       double x) {
  const double c = q[0], fwhm = q[1], a = q[2];
  const double dx = x - c;
  if (p == Profile::lorentzian) {
    const double h = 0.5 * fwhm;
    const double d = dx * dx + h * h;
    return {
        a * h * h * 2.0 * dx / (d * d),     // d/dcenter
        a * h * dx * dx / (d * d),          // d/dfwhm (= d/dh * 1/2 * 2h dx^2/d^2)
        h * h / d,                          // d/damplitude
        1.0,                                // d/doffset
    };
  }
  const double s = fwhm * kGaussFwhmToSigma;
  const double e = std::exp(-0.5 * dx * dx / (s * s));
  return {
      a * e * dx / (s * s),
      a * e * dx * dx / (s * s * s) * kGaussFwhmToSigma,
      e,
      1.0,
  };
}

namespace {

double objective(Profile p, const std::array<double, 4>& q,
                 std::span<const double> x, std::span<const double> y,
                 std::span<const double> w) {
  double chi2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - profile_value(p, q, x[i]);
    chi2 += w[i] * r * r;
  }
  return chi2;
}

PeakFit initial_guess(std::span<const double> x, std::span<const double> y) {
  const auto [mn_it, mx_it] = std::minmax_element(y.begin(), y.end());
  const std::size_t peak = static_cast<std::size_t>(mx_it - y.begin());
  PeakFit f;
  f.offset = *mn_it;
  f.amplitude = *mx_it - *mn_it;
  f.center = x[peak];
  // half-max crossing width
  const double half = f.offset + 0.5 * f.amplitude;
  std::size_t lo = peak, hi = peak;
  while (lo > 0 && y[lo] > half) --lo;
  while (hi + 1 < y.size() && y[hi] > half) ++hi;
  f.fwhm = std::max(std::abs(x[hi] - x[lo]), 2.0 * std::abs(x[1] - x[0]));
  return f;
}

}  // namespace

PeakFit fit_peak(std::span<const double> x, std::span<const double> y,
                 Profile profile, std::optional<PeakFit> init) {
  if (x.size() != y.size())
    throw std::invalid_argument("fit_peak: x/y size mismatch");
  if (x.size() < 5)
    throw std::invalid_argument("fit_peak: need at least 5 points");
  const auto [mn, mx] = std::minmax_element(y.begin(), y.end());
  if (*mx - *mn <= 0.0)
    throw std::invalid_argument("fit_peak: flat data");

  std::vector<double> w(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) w[i] = poisson_weight(y[i]);

  PeakFit fit = init.value_or(initial_guess(x, y));
  std::array<double, 4> q{fit.center, fit.fwhm, fit.amplitude, fit.offset};

  const LmOptions opt;
  double lambda = 1e-3;
  double chi2 = objective(profile, q, x, y, w);

  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    Eigen::Matrix4d jtj = Eigen::Matrix4d::Zero();
    Eigen::Vector4d jtr = Eigen::Vector4d::Zero();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const auto g = profile_gradient(profile, q, x[i]);
      const double r = y[i] - profile_value(profile, q, x[i]);
      const Eigen::Vector4d gv(g[0], g[1], g[2], g[3]);
      jtj += w[i] * gv * gv.transpose();
      jtr += w[i] * r * gv;
    }

    bool stepped = false;
    for (int tries = 0; tries < 12; ++tries) {
      Eigen::Matrix4d damped = jtj;
      for (int d = 0; d < 4; ++d)
        damped(d, d) += lambda * std::max(jtj(d, d), 1e-12);
      const Eigen::Vector4d step = damped.ldlt().solve(jtr);
      std::array<double, 4> trial{q[0] + step[0], q[1] + step[1],
                                  q[2] + step[2], q[3] + step[3]};
      trial[1] = std::abs(trial[1]);  // fwhm stays positive
      const double trial_chi2 = objective(profile, trial, x, y, w);
      if (std::isfinite(trial_chi2) && trial_chi2 <= chi2) {
        const double rel_decrease =
            (chi2 - trial_chi2) / std::max(chi2, 1e-300);
        const double step_norm = step.norm();
        q = trial;
        chi2 = trial_chi2;
        lambda = std::max(lambda * 0.3, 1e-12);
        stepped = true;
        if (rel_decrease < opt.objective_tol || step_norm < opt.step_tol) {
          fit.converged = true;
        }
        break;
      }
      lambda *= 8.0;
    }
    if (fit.converged || !stepped) break;
  }

  fit.center = q[0];
  fit.fwhm = q[1];
  fit.amplitude = q[2];
  fit.offset = q[3];
  fit.iterations = it + 1;

  // covariance from the weighted normal matrix at the solution
  Eigen::Matrix4d jtj = Eigen::Matrix4d::Zero();
  double rss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto g = profile_gradient(profile, q, x[i]);
    const Eigen::Vector4d gv(g[0], g[1], g[2], g[3]);
    jtj += w[i] * gv * gv.transpose();
    const double r = y[i] - profile_value(profile, q, x[i]);
    rss += r * r;
  }
  fit.residual_rms = std::sqrt(rss / static_cast<double>(x.size()));
  if (jtj.fullPivLu().isInvertible())
    fit.covariance = jtj.inverse();
  else
    fit.covariance = Eigen::Matrix4d::Zero();

  return fit;
}

StarkFitResult fit_stark_positions(std::span<const StarkPoint> data) {
  if (data.empty()) throw std::invalid_argument("fit_stark_positions: no data");

  std::set<int> families;
  std::set<double> voltages;
  for (const auto& p : data) {
    families.insert(p.family);
    voltages.insert(p.v_a);
  }
  const int nfam = static_cast<int>(families.size());
  if (nfam < 2)
    throw std::invalid_argument("fit_stark_positions: need >= 2 line families");
  if (voltages.size() < 4)
    throw std::invalid_argument("fit_stark_positions: need >= 4 voltages");
  for (int f = 0; f < nfam; ++f)
    if (!families.count(f))
      throw std::invalid_argument(
          "fit_stark_positions: family ids must be contiguous from 0");

  // per-family OLS slope fixes the branch sign, mirroring the by-tuning-slope
  // peak assignment
  std::vector<double> slope(nfam, 0.0);
  for (int f = 0; f < nfam; ++f) {
    double sv = 0, sy = 0, svv = 0, svy = 0;
    int n = 0;
    for (const auto& p : data) {
      if (p.family != f) continue;
      sv += p.v_a;
      sy += p.freq_ghz;
      svv += p.v_a * p.v_a;
      svy += p.v_a * p.freq_ghz;
      ++n;
    }
    const double det = n * svv - sv * sv;
    if (std::abs(det) < 1e-12)
      throw std::invalid_argument(
          "fit_stark_positions: family has no voltage spread");
    slope[f] = (n * svy - sv * sy) / det;
  }
  const double smax = *std::max_element(slope.begin(), slope.end());
  const double smin = *std::min_element(slope.begin(), slope.end());
  if (smax - smin < 1e-9 * std::max(1.0, std::abs(smax)))
    throw std::invalid_argument(
        "fit_stark_positions: d_perp_per_volt unidentifiable (all families on "
        "one branch)");
  const double mid = 0.5 * (smax + smin);
  std::vector<int> sign(nfam);
  for (int f = 0; f < nfam; ++f) sign[f] = slope[f] >= mid ? +1 : -1;

  // linear model: freq = dd*v + sign_f*dp*v + offset_f
  const int npar = 2 + nfam;
  const int n = static_cast<int>(data.size());
  Eigen::MatrixXd design = Eigen::MatrixXd::Zero(n, npar);
  Eigen::VectorXd rhs(n);
  for (int i = 0; i < n; ++i) {
    const auto& p = data[i];
    design(i, 0) = p.v_a;
    design(i, 1) = sign[p.family] * p.v_a;
    design(i, 2 + p.family) = 1.0;
    rhs(i) = p.freq_ghz;
  }

  const Eigen::MatrixXd normal = design.transpose() * design;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(normal);
  if (!lu.isInvertible())
    throw std::invalid_argument(
        "fit_stark_positions: rank-deficient design (dd_par/d_perp "
        "unidentifiable)");
  const Eigen::VectorXd beta = lu.solve(design.transpose() * rhs);

  const Eigen::VectorXd resid = rhs - design * beta;
  const double dof = std::max(1.0, static_cast<double>(n - npar));
  const double var = resid.squaredNorm() / dof;
  const Eigen::MatrixXd cov = var * lu.inverse();

  StarkFitResult out;
  out.dd_par_per_volt = {beta(0), std::sqrt(cov(0, 0))};
  out.d_perp_per_volt = {std::abs(beta(1)), std::sqrt(cov(1, 1))};
  out.zero_field_offsets.resize(nfam);
  for (int f = 0; f < nfam; ++f) out.zero_field_offsets[f] = beta(2 + f);
  out.family_branch_sign = sign;
  out.residual_rms = std::sqrt(resid.squaredNorm() / n);
  return out;
}

namespace {

// predicted line set of the six-level model at one voltage: eigenvalues plus
// the two ground-manifold offsets
std::array<double, 12> predicted_lines(const levels::FineStructureParams& p,
                                       double theta, double dd, double dp,
                                       double c0, double v) {
  const levels::ElectricField field{dd * v, std::abs(dp) * v, theta};
  const auto lv = levels::eigenlevels(levels::build_hamiltonian(p, field));
  std::array<double, 12> out{};
  for (int k = 0; k < 6; ++k) {
    out[2 * k] = lv[k].energy_ghz + c0;
    out[2 * k + 1] = lv[k].energy_ghz - p.d_gs + c0;
  }
  return out;
}

double nearest_line_residual(const levels::FineStructureParams& p, double theta,
                             double dd, double dp, double c0,
                             const StarkPoint& pt) {
  const auto lines = predicted_lines(p, theta, dd, dp, c0, pt.v_a);
  double best = std::numeric_limits<double>::infinity();
  for (double f : lines)
    if (std::abs(pt.freq_ghz - f) < std::abs(best)) best = pt.freq_ghz - f;
  return best;
}

// least-squares objective in theta with the scale factor profiled out
double theta_objective(std::span<const ThetaPoint> data,
                       const levels::FineStructureParams& params,
                       bool normalized, double theta, double* scale_out) {
  double mm = 0.0, my = 0.0;
  std::vector<double> model(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    model[i] = levels::lambda_emission_fraction(params, theta,
                                                data[i].delta_perp_ghz,
                                                normalized);
    mm += model[i] * model[i];
    my += model[i] * data[i].intensity;
  }
  const double scale = mm > 1e-12 ? my / mm : 0.0;
  if (scale_out) *scale_out = scale;
  double chi2 = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double r = data[i].intensity - scale * model[i];
    chi2 += r * r;
  }
  return chi2;
}

}  // namespace

StarkFitResult fit_theta_r(std::span<const ThetaPoint> data,
                           const levels::FineStructureParams& params,
                           bool normalized) {
  if (data.size() < 6)
    throw std::invalid_argument("fit_theta_r: need >= 6 data points");

  StarkFitResult out;

  // conditioning: the data must show Lambda mixing somewhere
  const double ymax =
      std::max_element(data.begin(), data.end(), [](auto& a, auto& b) {
        return a.intensity < b.intensity;
      })->intensity;
  if (ymax < 0.05) out.well_conditioned = false;

  // coarse scan over the fundamental domain, then parabolic refinement
  double best_theta = 0.0;
  double best_chi2 = std::numeric_limits<double>::infinity();
  for (double t = 0.5; t < 60.0; t += 1.0) {
    const double c = theta_objective(data, params, normalized, t, nullptr);
    if (c < best_chi2) {
      best_chi2 = c;
      best_theta = t;
    }
  }
  double lo = best_theta - 1.0, hi = best_theta + 1.0;
  for (int it = 0; it < 40; ++it) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    if (theta_objective(data, params, normalized, m1, nullptr) <
        theta_objective(data, params, normalized, m2, nullptr))
      hi = m2;
    else
      lo = m1;
  }
  double scale = 1.0;
  const double theta = 0.5 * (lo + hi);
  const double chi2 = theta_objective(data, params, normalized, theta, &scale);

  // error from curvature: var(theta) = 2 sigma^2 / chi''
  const double h = 0.5;
  const double cp = theta_objective(data, params, normalized, theta + h, nullptr);
  const double cm = theta_objective(data, params, normalized,
                                    std::max(theta - h, 0.0), nullptr);
  const double curv = (cp - 2.0 * chi2 + cm) / (h * h);
  const double sigma2 = chi2 / std::max<double>(1, data.size() - 2);
  const double se = curv > 1e-12 ? std::sqrt(2.0 * sigma2 / curv) : 60.0;

  out.theta_r_deg = {theta, se};
  out.residual_rms = std::sqrt(chi2 / data.size());
  out.zero_field_offsets = {scale};
  return out;
}

StarkFitResult fit_stark_hamiltonian(std::span<const StarkPoint> data,
                                     const levels::FineStructureParams& params,
                                     double theta_r_deg) {
  if (data.size() < 8)
    throw std::invalid_argument("fit_stark_hamiltonian: need >= 8 points");

  // seed from the linear branch fit where possible, else a crude slope
  double dd = 0.1, dp = 0.3;
  try {
    const auto lin = fit_stark_positions(data);
    dd = lin.dd_par_per_volt.value;
    dp = lin.d_perp_per_volt.value;
  } catch (const std::invalid_argument&) {
  }
  double c0 = 0.0;
  {
    double acc = 0.0;
    for (const auto& pt : data)
      acc += nearest_line_residual(params, theta_r_deg, dd, dp, 0.0, pt);
    c0 = acc / static_cast<double>(data.size());
  }

  Eigen::Vector3d q(dd, dp, c0);
  auto chi2_of = [&](const Eigen::Vector3d& p3) {
    double acc = 0.0;
    for (const auto& pt : data) {
      const double r =
          nearest_line_residual(params, theta_r_deg, p3(0), p3(1), p3(2), pt);
      acc += r * r;
    }
    return acc;
  };

  double lambda = 1e-3;
  double chi2 = chi2_of(q);
  bool converged = false;
  for (int it = 0; it < 200 && !converged; ++it) {
    Eigen::MatrixXd jac(data.size(), 3);
    Eigen::VectorXd res(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      res(i) = nearest_line_residual(params, theta_r_deg, q(0), q(1), q(2),
                                     data[i]);
      for (int k = 0; k < 3; ++k) {
        const double h = 1e-6 * std::max(1.0, std::abs(q(k)));
        Eigen::Vector3d qp = q, qm = q;
        qp(k) += h;
        qm(k) -= h;
        jac(i, k) = (nearest_line_residual(params, theta_r_deg, qp(0), qp(1),
                                           qp(2), data[i]) -
                     nearest_line_residual(params, theta_r_deg, qm(0), qm(1),
                                           qm(2), data[i])) /
                    (2.0 * h);
      }
    }
    const Eigen::Matrix3d jtj = jac.transpose() * jac;
    const Eigen::Vector3d jtr = -jac.transpose() * res;
    bool stepped = false;
    for (int tries = 0; tries < 12; ++tries) {
      Eigen::Matrix3d damped = jtj;
      for (int d = 0; d < 3; ++d)
        damped(d, d) += lambda * std::max(jtj(d, d), 1e-12);
      const Eigen::Vector3d step = damped.ldlt().solve(jtr);
      const Eigen::Vector3d trial = q + step;
      const double trial_chi2 = chi2_of(trial);
      if (std::isfinite(trial_chi2) && trial_chi2 <= chi2) {
        const double rel = (chi2 - trial_chi2) / std::max(chi2, 1e-300);
        q = trial;
        chi2 = trial_chi2;
        lambda = std::max(lambda * 0.3, 1e-12);
        stepped = true;
        if (rel < 1e-10 || step.norm() < 1e-8) converged = true;
        break;
      }
      lambda *= 8.0;
    }
    if (!stepped) break;
  }

  // covariance at the solution
  Eigen::Matrix3d jtj = Eigen::Matrix3d::Zero();
  for (const auto& pt : data) {
    Eigen::Vector3d g;
    for (int k = 0; k < 3; ++k) {
      const double h = 1e-6 * std::max(1.0, std::abs(q(k)));
      Eigen::Vector3d qp = q, qm = q;
      qp(k) += h;
      qm(k) -= h;
      g(k) = (nearest_line_residual(params, theta_r_deg, qp(0), qp(1), qp(2), pt) -
              nearest_line_residual(params, theta_r_deg, qm(0), qm(1), qm(2), pt)) /
             (2.0 * h);
    }
    jtj += g * g.transpose();
  }
  const double dof = std::max(1.0, static_cast<double>(data.size()) - 3.0);
  const double var = chi2 / dof;

  StarkFitResult out;
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  if (jtj.fullPivLu().isInvertible()) cov = var * jtj.inverse();
  out.dd_par_per_volt = {q(0), std::sqrt(std::abs(cov(0, 0)))};
  out.d_perp_per_volt = {std::abs(q(1)), std::sqrt(std::abs(cov(1, 1)))};
  out.zero_field_offsets = {q(2)};
  out.residual_rms = std::sqrt(chi2 / static_cast<double>(data.size()));
  out.well_conditioned = converged;
  return out;
}

std::vector<StarkPoint> associate_families(
    std::span<const double> voltages,
    std::span<const std::vector<double>> frames) {
  if (voltages.size() != frames.size())
    throw std::invalid_argument("associate_families: size mismatch");
  if (frames.empty()) return {};

  const int nfam = static_cast<int>(frames.front().size());
  std::vector<double> last_pos(frames.front());
  std::vector<double> last_v(nfam, voltages.front());
  std::vector<double> slope(nfam, 0.0);

  std::vector<StarkPoint> out;
  for (int f = 0; f < nfam; ++f)
    out.push_back({voltages.front(), frames.front()[f], f});

  for (std::size_t k = 1; k < frames.size(); ++k) {
    const double v = voltages[k];
    std::vector<bool> taken(frames[k].size(), false);
    // families claim peaks in order of best (smallest) prediction distance
    std::vector<std::pair<double, std::pair<int, int>>> costs;
    for (int f = 0; f < nfam; ++f) {
      const double pred = last_pos[f] + slope[f] * (v - last_v[f]);
      for (std::size_t p = 0; p < frames[k].size(); ++p)
        costs.push_back({std::abs(frames[k][p] - pred), {f, int(p)}});
    }
    std::sort(costs.begin(), costs.end());
    std::vector<bool> fam_done(nfam, false);
    for (const auto& [cost, fp] : costs) {
      const auto [f, p] = fp;
      if (fam_done[f] || taken[p]) continue;
      fam_done[f] = true;
      taken[p] = true;
      const double pos = frames[k][p];
      if (v != last_v[f]) slope[f] = (pos - last_pos[f]) / (v - last_v[f]);
      last_pos[f] = pos;
      last_v[f] = v;
      out.push_back({v, pos, f});
    }
  }
  return out;
}

}  // namespace nvstark::fitting
