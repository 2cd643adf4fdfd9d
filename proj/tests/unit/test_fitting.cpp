#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "nvstark/fitting.hpp"

using namespace nvstark;
using fitting::PeakFit;
using fitting::Profile;
using fitting::StarkPoint;
using fitting::ThetaPoint;

namespace {

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
  return v;
}

std::vector<double> sample_profile(Profile p, const std::array<double, 4>& q,
                                   const std::vector<double>& x) {
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    y[i] = fitting::profile_value(p, q, x[i]);
  return y;
}

}  // namespace

TEST_SUITE_BEGIN("fitting");

TEST_CASE("analytic profile gradients match central differences") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (Profile p : {Profile::lorentzian, Profile::gaussian}) {
    for (int trial = 0; trial < 100; ++trial) {
      const std::array<double, 4> q{uni(rng) * 2.0 - 1.0, 0.05 + uni(rng),
                                    0.5 + 5.0 * uni(rng), uni(rng) * 10.0};
      const double x = 3.0 * (uni(rng) - 0.5);
      const auto g = fitting::profile_gradient(p, q, x);
      for (int k = 0; k < 4; ++k) {
        const double h = 1e-6 * std::max(1.0, std::abs(q[k]));
        auto qp = q, qm = q;
        qp[k] += h;
        qm[k] -= h;
        const double fd = (fitting::profile_value(p, qp, x) -
                           fitting::profile_value(p, qm, x)) /
                          (2.0 * h);
        const double scale = std::max({std::abs(g[k]), std::abs(fd), 1e-3});
        CHECK(std::abs(g[k] - fd) / scale < 1e-6);
      }
    }
  }
}

TEST_CASE("noiseless Lorentzian is recovered exactly") {
  const std::array<double, 4> truth{0.3, 0.06, 40.0, 3.0};
  const auto x = linspace(0.0, 0.6, 41);
  const auto y = sample_profile(Profile::lorentzian, truth, x);
  const auto fit = fitting::fit_peak(x, y, Profile::lorentzian);
  CHECK(fit.converged);
  CHECK(std::abs(fit.center - 0.3) < 1e-6);
  CHECK(std::abs(fit.fwhm - 0.06) < 1e-6);
  CHECK(std::abs(fit.amplitude - 40.0) < 1e-4);
  CHECK(std::abs(fit.offset - 3.0) < 1e-4);
}

TEST_CASE("instrument-limited Gaussian line: 1.4 GHz width recovered") {
  const std::array<double, 4> truth{0.0, 1.4, 200.0, 5.0};
  const auto x = linspace(-5.0, 5.0, 60);
  auto y = sample_profile(Profile::gaussian, truth, x);
  std::mt19937_64 rng(5);
  for (auto& v : y) {
    std::poisson_distribution<long> pois(v);
    v = static_cast<double>(pois(rng));
  }
  const auto fit = fitting::fit_peak(x, y, Profile::gaussian);
  CHECK(fit.converged);
  CHECK(fit.fwhm == doctest::Approx(1.4).epsilon(0.1));
}

TEST_CASE("fit idempotence: refitting a converged solution stays put") {
  const std::array<double, 4> truth{0.1, 0.2, 30.0, 2.0};
  const auto x = linspace(-1.0, 1.0, 51);
  auto y = sample_profile(Profile::lorentzian, truth, x);
  std::mt19937_64 rng(17);
  for (auto& v : y) {
    std::poisson_distribution<long> pois(v);
    v = static_cast<double>(pois(rng));
  }
  const auto first = fitting::fit_peak(x, y, Profile::lorentzian);
  const auto second = fitting::fit_peak(x, y, Profile::lorentzian, first);
  CHECK(std::abs(first.center - second.center) < 1e-7);
  CHECK(std::abs(first.fwhm - second.fwhm) < 1e-7);
  CHECK(std::abs(first.amplitude - second.amplitude) < 1e-6 * first.amplitude);
}

TEST_CASE("profile symmetry: mirrored data mirrors the center") {
  const std::array<double, 4> truth{0.22, 0.1, 25.0, 1.0};
  const auto x = linspace(-1.0, 1.0, 81);
  auto y = sample_profile(Profile::lorentzian, truth, x);
  std::mt19937_64 rng(23);
  for (auto& v : y) {
    std::poisson_distribution<long> pois(v);
    v = static_cast<double>(pois(rng));
  }
  auto ym = y;
  std::reverse(ym.begin(), ym.end());
  const auto fit = fitting::fit_peak(x, y, Profile::lorentzian);
  const auto mirror = fitting::fit_peak(x, ym, Profile::lorentzian);
  CHECK(fit.center == doctest::Approx(-mirror.center).epsilon(1e-6));
  CHECK(fit.fwhm == doctest::Approx(mirror.fwhm).epsilon(1e-9));
}

TEST_CASE("narrow-line center estimator: spread well below Gamma_ss, tiny bias") {
  // Gamma_ss = 60 MHz line at PLE-like signal level
  const std::array<double, 4> truth{0.0, 0.060, 90.0, 2.7};
  const auto x = linspace(-0.3, 0.3, 30);
  const auto clean = sample_profile(Profile::lorentzian, truth, x);
  std::mt19937_64 rng(29);
  std::vector<double> centers;
  for (int s = 0; s < 400; ++s) {
    std::vector<double> y(clean.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      std::poisson_distribution<long> pois(clean[i]);
      y[i] = static_cast<double>(pois(rng));
    }
    const auto fit = fitting::fit_peak(x, y, Profile::lorentzian);
    if (fit.converged) centers.push_back(fit.center);
  }
  REQUIRE(centers.size() > 380);
  double mean = 0.0;
  for (double c : centers) mean += c;
  mean /= centers.size();
  double var = 0.0;
  for (double c : centers) var += (c - mean) * (c - mean);
  const double std_mhz = std::sqrt(var / (centers.size() - 1)) * 1e3;
  CHECK(std_mhz < 20.0);                 // well below Gamma_ss = 60 MHz
  CHECK(std::abs(mean) * 1e3 < 1.0);     // bias below 1 MHz
}

TEST_CASE("degenerate inputs are rejected") {
  const auto x = linspace(0.0, 1.0, 11);
  std::vector<double> flat(x.size(), 4.0);
  CHECK_THROWS_AS((void)fitting::fit_peak(x, flat, Profile::lorentzian),
                  std::invalid_argument);
  std::vector<double> tiny_x{0.0, 1.0, 2.0};
  std::vector<double> tiny_y{0.0, 1.0, 0.0};
  CHECK_THROWS_AS((void)fitting::fit_peak(tiny_x, tiny_y, Profile::lorentzian),
                  std::invalid_argument);
}

namespace {

std::vector<StarkPoint> make_stark_dataset(double dd, double dp, int n_volts,
                                           double noise_ghz, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, noise_ghz);
  std::vector<StarkPoint> data;
  const std::array<double, 3> offsets{0.5, -0.3, -0.3 - 2.88};
  const std::array<int, 3> signs{+1, -1, -1};
  for (int f = 0; f < 3; ++f) {
    for (int i = 0; i < n_volts; ++i) {
      const double v = 10.0 * i / (n_volts - 1);
      const double y = offsets[f] + (dd + signs[f] * dp) * v +
                       (noise_ghz > 0 ? gauss(rng) : 0.0);
      data.push_back({v, y, f});
    }
  }
  return data;
}

}  // namespace

TEST_CASE("stark position fit: exact on noiseless data") {
  const auto data = make_stark_dataset(0.42, 1.03, 8, 0.0, 0);
  const auto fit = fitting::fit_stark_positions(data);
  CHECK(fit.dd_par_per_volt.value == doctest::Approx(0.42).epsilon(1e-9));
  CHECK(fit.d_perp_per_volt.value == doctest::Approx(1.03).epsilon(1e-9));
  CHECK(fit.zero_field_offsets[0] == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(fit.residual_rms < 1e-9);
}

TEST_CASE("stark position fit: 50 MHz noise recovery at the PLE coefficients") {
  const auto data = make_stark_dataset(0.11, 0.26, 20, 0.050, 31);
  const auto fit = fitting::fit_stark_positions(data);
  CHECK(std::abs(fit.dd_par_per_volt.value - 0.11) < 0.05 * 0.11 + 3 * fit.dd_par_per_volt.stderr_);
  CHECK(std::abs(fit.d_perp_per_volt.value - 0.26) < 0.05 * 0.26 + 3 * fit.d_perp_per_volt.stderr_);
  CHECK(fit.dd_par_per_volt.stderr_ > 0.0);
}

TEST_CASE("stark position fit: one branch only is unidentifiable") {
  std::vector<StarkPoint> data;
  for (int f = 0; f < 2; ++f)
    for (int i = 0; i < 8; ++i) {
      const double v = i * 1.0;
      data.push_back({v, 0.2 * f + 1.45 * v, f});  // both slopes positive equal
    }
  CHECK_THROWS_WITH_AS((void)fitting::fit_stark_positions(data),
                       doctest::Contains("d_perp_per_volt"),
                       std::invalid_argument);
}

TEST_CASE("stark position fit: input contract") {
  std::vector<StarkPoint> one_family;
  for (int i = 0; i < 8; ++i) one_family.push_back({1.0 * i, 0.4 * i, 0});
  CHECK_THROWS_AS((void)fitting::fit_stark_positions(one_family),
                  std::invalid_argument);
  const auto too_few = make_stark_dataset(0.4, 1.0, 3, 0.0, 0);
  CHECK_THROWS_AS((void)fitting::fit_stark_positions(too_few),
                  std::invalid_argument);
}

namespace {

std::vector<ThetaPoint> make_theta_dataset(
    const levels::FineStructureParams& params, double theta, int n,
    double noise_frac, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::vector<ThetaPoint> data;
  double ymax = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = 0.5 + 19.0 * i / (n - 1);
    const double y = scale * levels::lambda_emission_fraction(params, theta, d);
    ymax = std::max(ymax, y);
    data.push_back({d, y});
  }
  if (noise_frac > 0) {
    std::normal_distribution<double> gauss(0.0, noise_frac * ymax);
    for (auto& p : data) p.intensity += gauss(rng);
  }
  return data;
}

}  // namespace

TEST_CASE("theta_r fit: noiseless injection is exact") {
  levels::FineStructureParams params;
  const auto data = make_theta_dataset(params, 15.0, 40, 0.0, 0);
  const auto fit = fitting::fit_theta_r(data, params);
  CHECK(fit.theta_r_deg.value == doctest::Approx(15.0).epsilon(1e-3));
  CHECK(fit.well_conditioned);
}

TEST_CASE("theta_r fit: 5% noise recovers within 5 degrees") {
  levels::FineStructureParams params;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto data = make_theta_dataset(params, 15.0, 40, 0.05, seed, 0.8);
    const auto fit = fitting::fit_theta_r(data, params);
    CHECK(std::abs(fit.theta_r_deg.value - 15.0) < 5.0);
  }
}

TEST_CASE("theta_r fit: replication angle 12 degrees") {
  levels::FineStructureParams params;
  const auto data = make_theta_dataset(params, 12.0, 40, 0.05, 7, 1.2);
  const auto fit = fitting::fit_theta_r(data, params);
  CHECK(std::abs(fit.theta_r_deg.value - 12.0) < 5.0);
}

TEST_CASE("family association tracks crossing lines by slope continuity") {
  // two families: one rising (+1.45/V from 0), one falling (-0.6/V from 10)
  std::vector<double> voltages;
  std::vector<std::vector<double>> frames;
  for (int i = 0; i <= 10; ++i) {
    const double v = i;
    voltages.push_back(v);
    const double up = 1.45 * v;
    const double down = 10.0 - 0.6 * v;
    // frames arrive sorted by position, so the families swap slots mid-sweep
    frames.push_back(up < down ? std::vector{up, down} : std::vector{down, up});
  }
  const auto pts = fitting::associate_families(voltages, frames);
  REQUIRE(pts.size() == 22);
  for (const auto& p : pts) {
    if (p.family == 0)
      CHECK(p.freq_ghz == doctest::Approx(1.45 * p.v_a));
    else
      CHECK(p.freq_ghz == doctest::Approx(10.0 - 0.6 * p.v_a));
  }
}

TEST_CASE("theta_r fit: data missing the anticrossings is flagged") {
  levels::FineStructureParams params;
  std::vector<ThetaPoint> data;
  for (int i = 0; i < 10; ++i)
    data.push_back({0.1 + 0.2 * i,
                    levels::lambda_emission_fraction(params, 15.0, 0.1 + 0.2 * i)});
  const auto fit = fitting::fit_theta_r(data, params);
  CHECK_FALSE(fit.well_conditioned);
}

TEST_SUITE_END();
