#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "atomscope/errors.hpp"
#include "atomscope/field.hpp"
#include "atomscope/inference.hpp"
#include "atomscope/rng.hpp"
#include "atomscope/units.hpp"

using namespace atomscope;

namespace {

const PhysicalConstants kConstants = PhysicalConstants::cesium_d2();

std::vector<IntensitySample> eq1_samples(double rho, double power, int count,
                                         double noise_sigma = 0.0,
                                         std::uint64_t seed = 0) {
  AnalyticEvanescentModel m;
  m.power = power;
  m.decay_length = rho;
  m.r_min = 10e-9;
  std::vector<IntensitySample> samples;
  const rng::Substream s = rng::Substream(seed).fork(rng::stage::noise);
  for (int i = 0; i < count; ++i) {
    const double r = 0.2e-6 + (5e-6 - 0.2e-6) * i / (count - 1);
    double intensity = intensity_analytic(m, r);
    if (noise_sigma > 0.0) {
      intensity *= std::exp(noise_sigma * s.normal(static_cast<std::uint64_t>(i)));
    }
    samples.push_back({r, intensity});
  }
  return samples;
}

std::vector<double> default_release_times() {
  std::vector<double> t;
  for (double us : {0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 40.0, 50.0, 70.0, 100.0}) {
    t.push_back(us * 1e-6);
  }
  return t;
}

}  // namespace

TEST_CASE("decay fit: noiseless round trip hits 743.2 nm") {
  const double rho = 743.2e-9;
  const auto samples = eq1_samples(rho, 1e-9, 50);
  const auto fit = fit_decay_length(samples, 1e-9);
  CHECK(fit.converged);
  CHECK(fit.params.at("rho") == doctest::Approx(rho).epsilon(1e-3));
  CHECK(fit.params.at("rho") == doctest::Approx(rho).epsilon(1e-9));
  CHECK(fit.residual_norm < 1e-10);
}

TEST_CASE("decay fit: first-order optimality at the solution") {
  const double rho = 600e-9;
  const auto samples = eq1_samples(rho, 1e-9, 40, 0.05, 7);
  const auto fit = fit_decay_length(samples, 1e-9);
  REQUIRE(fit.converged);
  // central finite differences of the objective in theta = ln rho; the
  // Newton step |grad/curv| is the scale-free optimality measure
  auto chi2 = [&](double theta) {
    const double r = std::exp(theta);
    double acc = 0.0;
    for (const auto& s : samples) {
      const double f =
          std::log(s.intensity) - decay_model_log_intensity(s.r, r, 1e-9);
      acc += f * f;
    }
    return acc;
  };
  const double theta = std::log(fit.params.at("rho"));
  const double h = 1e-5;
  const double grad = (chi2(theta + h) - chi2(theta - h)) / (2.0 * h);
  const double curv =
      (chi2(theta + h) - 2.0 * chi2(theta) + chi2(theta - h)) / (h * h);
  CHECK(std::abs(grad / curv) < 1e-8);
}

TEST_CASE("decay fit: noisy recovery within 3 sigma") {
  const double rho = 743.2e-9;
  const auto samples = eq1_samples(rho, 1e-9, 50, 0.05, 11);
  const auto fit = fit_decay_length(samples, 1e-9);
  CHECK(fit.converged);
  const double err = std::abs(fit.params.at("rho") - rho);
  CHECK(err < 3.0 * fit.std_errors.at("rho"));
  CHECK(fit.std_errors.at("rho") > 0.0);
}

TEST_CASE("decay fit: log-offset invariance with a free prefactor") {
  const double rho = 1000e-9;
  auto samples = eq1_samples(rho, 1e-9, 30);
  DecayFitOptions opt;
  opt.free_prefactor = true;
  const auto base = fit_decay_length(samples, 1e-9, {}, opt);
  for (double c : {3.7, 0.01, 250.0}) {
    auto scaled = samples;
    for (auto& s : scaled) s.intensity *= c;
    const auto fit = fit_decay_length(scaled, 1e-9, {}, opt);
    CHECK(fit.params.at("rho") ==
          doctest::Approx(base.params.at("rho")).epsilon(1e-9));
  }
}

TEST_CASE("decay fit: unit equivariance") {
  const double rho = 743.2e-9;
  const auto samples = eq1_samples(rho, 1e-9, 40, 0.02, 3);
  const auto fit_m = fit_decay_length(samples, 1e-9);
  // express r in um and I in W/um^2; power unchanged => rho in um
  std::vector<IntensitySample> scaled;
  for (const auto& s : samples) {
    scaled.push_back({s.r * 1e6, s.intensity * 1e-12});
  }
  const auto fit_um = fit_decay_length(scaled, 1e-9);
  CHECK(fit_um.params.at("rho") ==
        doctest::Approx(fit_m.params.at("rho") * 1e6).epsilon(1e-9));
}

TEST_CASE("decay fit: preconditions") {
  std::vector<IntensitySample> two = {{1e-6, 5.0}, {2e-6, 2.0}};
  CHECK_THROWS_AS((void)fit_decay_length(two, 1e-9), InvalidParameterError);
  std::vector<IntensitySample> bad = {{1e-6, 5.0}, {2e-6, -2.0}, {3e-6, 1.0}};
  CHECK_THROWS_AS((void)fit_decay_length(bad, 1e-9), InvalidParameterError);
  const auto ok = eq1_samples(700e-9, 1e-9, 10);
  CHECK_THROWS_AS((void)fit_decay_length(ok, 0.0), InvalidParameterError);
}

TEST_CASE("release-recapture simulation") {
  const TrapSpec trap;
  const auto times = default_release_times();

  SUBCASE("t = 0 always recaptures") {
    for (double temp : {0.0, 10e-6, 40e-6, 100e-6}) {
      const auto curve = release_recapture_simulate(temp, trap, kConstants,
                                                    {times.data(), 1}, 2000, 5);
      CHECK(curve.survival[0] == 1.0);
    }
  }

  SUBCASE("zero temperature, short times: nothing escapes") {
    const auto curve =
        release_recapture_simulate(0.0, trap, kConstants, times, 500, 5);
    for (std::size_t i = 0; i < times.size(); ++i) {
      CHECK(curve.survival[i] == 1.0);
    }
  }

  SUBCASE("zero temperature and zero gravity survive forever") {
    PhysicalConstants c = kConstants;
    c.gravity = 1e-30;  // effectively off; zero fails the positivity check
    std::vector<double> long_times = {0.0, 1e-3, 10e-3, 100e-3};
    const auto curve =
        release_recapture_simulate(0.0, trap, c, long_times, 1000, 5);
    for (double s : curve.survival) CHECK(s == 1.0);
  }

  SUBCASE("monotone in time and temperature") {
    const long n = 20000;
    // shots are independent per release time; allow 4 sigma binomial slack
    const double slack = 4.0 * std::sqrt(0.5 / n);
    double prev_curve_mean = 2.0;
    for (double temp : {10e-6, 40e-6, 100e-6}) {
      const auto curve =
          release_recapture_simulate(temp, trap, kConstants, times, n, 9);
      double prev = 1.0 + 1e-9;
      double mean = 0.0;
      for (double s : curve.survival) {
        CHECK(s <= prev + slack);
        prev = s;
        mean += s;
      }
      mean /= static_cast<double>(curve.survival.size());
      CHECK(mean < prev_curve_mean);
      prev_curve_mean = mean;
    }
  }

  SUBCASE("40 uK drops significantly inside 100 us") {
    const auto curve =
        release_recapture_simulate(40e-6, trap, kConstants, times, 20000, 13);
    CHECK(curve.survival.front() > 0.95);
    CHECK(curve.survival.back() < 0.65);
  }

  SUBCASE("invalid parameters") {
    CHECK_THROWS_AS((void)release_recapture_simulate(-1.0, trap, kConstants,
                                                     times, 100, 1),
                    InvalidParameterError);
    CHECK_THROWS_AS((void)release_recapture_simulate(1e-6, trap, kConstants,
                                                     times, 0, 1),
                    InvalidParameterError);
  }
}

TEST_CASE("thermometry round trip at 40 uK") {
  const TrapSpec trap;
  const auto times = default_release_times();
  const auto observed = release_recapture_simulate(40e-6, trap, kConstants,
                                                   times, 10000, 2024);
  ThermometryOptions opt;
  opt.bootstrap_resamples = 12;
  const auto fit = fit_temperature(observed, trap, kConstants, opt);
  CHECK(fit.converged);
  CHECK(fit.params.at("temperature") == doctest::Approx(40e-6).epsilon(0.15));
  CHECK(fit.std_errors.at("temperature") > 0.0);

  SUBCASE("chi2 is locally minimal") {
    const double t_hat = fit.params.at("temperature");
    const double at_hat = thermometry_chi2(observed, t_hat, trap, kConstants, opt);
    CHECK(at_hat <= thermometry_chi2(observed, 0.5 * t_hat, trap, kConstants, opt));
    CHECK(at_hat <= thermometry_chi2(observed, 2.0 * t_hat, trap, kConstants, opt));
  }
}

TEST_CASE("thermometry edge cases") {
  const TrapSpec trap;

  SUBCASE("flat curve is insufficient signal") {
    ReleaseRecaptureCurve flat;
    flat.release_times = {0.0, 1e-5, 2e-5, 3e-5};
    flat.survival = {1.0, 0.99, 0.98, 0.97};
    flat.n_samples = 1000;
    CHECK_THROWS_AS((void)fit_temperature(flat, trap, kConstants),
                    InsufficientSignalError);
  }

  SUBCASE("zero-temperature data pins the lower bound, flagged") {
    // long times so even T = 0 shows a gravity-driven drop
    std::vector<double> long_times;
    for (int i = 0; i <= 8; ++i) long_times.push_back(i * 0.4e-3);
    const auto observed = release_recapture_simulate(0.0, trap, kConstants,
                                                     long_times, 4000, 55);
    ThermometryOptions opt;
    opt.bootstrap_resamples = 0;
    const auto fit = fit_temperature(observed, trap, kConstants, opt);
    CHECK_FALSE(fit.converged);  // at-bound flag
    CHECK(fit.params.at("temperature") <=
          opt.t_min * std::exp(2.0 * opt.log_tol) * 1.01);
  }

  SUBCASE("seed robustness") {
    const auto times = default_release_times();
    ThermometryOptions opt;
    opt.bootstrap_resamples = 12;
    const auto obs1 = release_recapture_simulate(40e-6, TrapSpec{}, kConstants,
                                                 times, 10000, 101);
    const auto obs2 = release_recapture_simulate(40e-6, TrapSpec{}, kConstants,
                                                 times, 10000, 202);
    const auto f1 = fit_temperature(obs1, TrapSpec{}, kConstants, opt);
    const auto f2 = fit_temperature(obs2, TrapSpec{}, kConstants, opt);
    const double se = std::hypot(f1.std_errors.at("temperature"),
                                 f2.std_errors.at("temperature"));
    CHECK(std::abs(f1.params.at("temperature") - f2.params.at("temperature")) <
          2.0 * se);
  }
}
