#include "atomscope/inference.hpp"

#include <algorithm>
#include <cmath>

#include "atomscope/errors.hpp"
#include "atomscope/parallel.hpp"
#include "atomscope/rng.hpp"
#include "atomscope/units.hpp"

namespace atomscope {

double decay_model_log_intensity(double r, double rho, double power,
                                 double log_prefactor_offset) {
  return std::log(power / (units::pi * rho)) - std::log(r) - 2.0 * r / rho +
         log_prefactor_offset;
}

namespace {

struct Objective {
  // residuals f_i = ln I_i - ln model_i at ln rho = theta; with a free
  // prefactor the mean residual is profiled out first.
  const std::vector<double>& log_i;
  const std::vector<double>& r;
  const std::vector<double>& w;
  double power;
  bool free_prefactor;

  struct Eval {
    double chi2 = 0.0;
    double gradient = 0.0;   // d chi2 / d theta
    double curvature = 0.0;  // Gauss-Newton J^T W J (times 2)
    double offset = 0.0;     // profiled log-prefactor
  };

  Eval operator()(double theta) const {
    const double rho = std::exp(theta);
    const std::size_t n = r.size();
    Eval e;
    std::vector<double> f(n);
    double wsum = 0.0, fmean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      f[i] = log_i[i] - decay_model_log_intensity(r[i], rho, power);
      wsum += w[i];
      fmean += w[i] * f[i];
    }
    if (free_prefactor) {
      e.offset = fmean / wsum;
      for (std::size_t i = 0; i < n; ++i) f[i] -= e.offset;
    }
    // d(ln model)/d(theta): -1 from the 1/rho prefactor, +2r/rho from the
    // exponential; with a free prefactor only the centered slope term acts.
    double jm = 0.0;
    std::vector<double> j(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double dmodel = -1.0 + 2.0 * r[i] / rho;
      j[i] = -dmodel;
      jm += w[i] * dmodel;
    }
    if (free_prefactor) {
      const double mean_dmodel = jm / wsum;
      for (std::size_t i = 0; i < n; ++i) j[i] += mean_dmodel;
    }
    for (std::size_t i = 0; i < n; ++i) {
      e.chi2 += w[i] * f[i] * f[i];
      e.gradient += 2.0 * w[i] * f[i] * j[i];
      e.curvature += 2.0 * w[i] * j[i] * j[i];
    }
    return e;
  }
};

}  // namespace

FitResult fit_decay_length(std::span<const IntensitySample> samples,
                           double power, std::span<const double> weights,
                           const DecayFitOptions& options) {
  if (samples.size() < 3) {
    throw InvalidParameterError(
        "fit_decay_length: need at least 3 samples, got " +
        std::to_string(samples.size()));
  }
  if (!(power > 0.0)) {
    throw InvalidParameterError("fit_decay_length: power must be > 0");
  }
  if (!weights.empty() && weights.size() != samples.size()) {
    throw InvalidParameterError("fit_decay_length: weight/sample size mismatch");
  }

  const std::size_t n = samples.size();
  std::vector<double> r(n), log_i(n), w(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(samples[i].r > 0.0) || !(samples[i].intensity > 0.0)) {
      throw InvalidParameterError(
          "fit_decay_length: sample " + std::to_string(i) +
          " must have r > 0 and intensity > 0");
    }
    r[i] = samples[i].r;
    log_i[i] = std::log(samples[i].intensity);
    if (!weights.empty()) {
      if (!(weights[i] >= 0.0)) {
        throw InvalidParameterError("fit_decay_length: weights must be >= 0");
      }
      w[i] = weights[i];
    }
  }

  // initial guess: ln(I r) = const - 2 r / rho, so the slope gives rho
  double sx = 0.0, sy = 0.0, sw = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += w[i] * r[i];
    sy += w[i] * (log_i[i] + std::log(r[i]));
    sw += w[i];
  }
  if (!(sw > 0.0)) {
    throw InvalidParameterError("fit_decay_length: weights sum to zero");
  }
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = r[i] - mx;
    sxx += w[i] * dx * dx;
    sxy += w[i] * dx * (log_i[i] + std::log(r[i]) - my);
  }
  const double slope = sxy / sxx;
  double rho0 = slope < 0.0 ? -2.0 / slope
                            : (r.back() - r.front());  // fallback for rising data
  if (!(rho0 > 0.0) || !std::isfinite(rho0)) rho0 = r.back();

  const Objective obj{log_i, r, w, power, options.free_prefactor};
  double theta = std::log(rho0);
  auto cur = obj(theta);
  FitResult result;
  bool converged = false;
  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    if (std::abs(cur.gradient) <= options.gradient_tol * (1.0 + cur.chi2)) {
      converged = true;
      break;
    }
    const double step = -cur.gradient / cur.curvature;  // Gauss-Newton
    double scale = 1.0;
    bool improved = false;
    for (int half = 0; half < 40; ++half) {
      const double trial = theta + scale * step;
      const auto next = obj(trial);
      if (next.chi2 <= cur.chi2) {
        // accept even a flat step; the gradient check exits the loop
        theta = trial;
        cur = next;
        improved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!improved || std::abs(scale * step) < 1e-15 * (1.0 + std::abs(theta))) {
      converged = std::abs(cur.gradient) <= 1e-6 * (1.0 + cur.chi2);
      break;
    }
  }
  if (!converged && iter >= options.max_iterations) {
    throw NonConvergenceError(
        "fit_decay_length: no convergence after " +
        std::to_string(options.max_iterations) +
        " iterations; last rho = " + std::to_string(std::exp(theta)) +
        " m, |gradient| = " + std::to_string(std::abs(cur.gradient)));
  }

  const double rho = std::exp(theta);
  const std::size_t dof = n - (options.free_prefactor ? 2 : 1);
  const double s2 = dof > 0 ? cur.chi2 / static_cast<double>(dof) : 0.0;
  // curvature is 2 J^T W J; Var(theta) = s2 / (J^T W J)
  const double var_theta = s2 / (0.5 * cur.curvature);
  result.params["rho"] = rho;
  result.std_errors["rho"] = rho * std::sqrt(std::max(var_theta, 0.0));
  if (options.free_prefactor) {
    result.params["log_prefactor"] = cur.offset;
    result.std_errors["log_prefactor"] = std::sqrt(std::max(s2 / sw, 0.0));
  }
  result.residual_norm = std::sqrt(cur.chi2);
  result.iterations = iter;
  result.converged = converged;
  return result;
}

namespace {

struct TrapShape {
  double depth;      // J
  double waist;      // m
  double rayleigh;   // m
  double mass;
  double sigma_r;    // thermal position spread, radial
  double sigma_ax;
  double sigma_v;    // thermal velocity spread per axis
  double gravity;
};

// Gaussian-beam potential relative to the continuum (negative inside).
double trap_potential(const TrapShape& t, double x, double y, double z) {
  const double zr2 = 1.0 + (z / t.rayleigh) * (z / t.rayleigh);
  const double w2 = t.waist * t.waist * zr2;
  return -t.depth / zr2 * std::exp(-2.0 * (x * x + y * y) / w2);
}

// One atom: thermal draw, ballistic flight, energy test at recapture.
// Gravity acts along -x (a radial axis). Each (release time, sample) pair is
// an independent shot with its own atom, as in the experiment, keyed so the
// curve is identical for any worker count. The thermal draw is conditioned
// on being bound in the Gaussian trap (truncated Boltzmann): the anharmonic
// tail of the harmonic proposal is resampled, so t = 0 recaptures
// everything.
bool recaptured(const TrapShape& t, const rng::Substream& stream,
                std::uint64_t time_index, std::uint64_t sample,
                double release_time) {
  const auto s = stream.fork(time_index).fork(sample);
  const auto pos = s.fork(rng::stage::position);
  const auto vel = s.fork(rng::stage::velocity);

  double x0 = 0.0, y0 = 0.0, z0 = 0.0, vx0 = 0.0, vy0 = 0.0, vz0 = 0.0;
  for (std::uint64_t attempt = 0;; ++attempt) {
    const std::uint64_t base = 3 * attempt;
    x0 = t.sigma_r * pos.normal(base);
    y0 = t.sigma_r * pos.normal(base + 1);
    z0 = t.sigma_ax * pos.normal(base + 2);
    vx0 = t.sigma_v * vel.normal(base);
    vy0 = t.sigma_v * vel.normal(base + 1);
    vz0 = t.sigma_v * vel.normal(base + 2);
    const double e0 = 0.5 * t.mass * (vx0 * vx0 + vy0 * vy0 + vz0 * vz0) +
                      trap_potential(t, x0, y0, z0);
    if (e0 < 0.0 || attempt > 256) break;  // rejection rate is well below 1%
  }

  const double dt = release_time;
  const double x = x0 + vx0 * dt - 0.5 * t.gravity * dt * dt;
  const double y = y0 + vy0 * dt;
  const double z = z0 + vz0 * dt;
  const double vx = vx0 - t.gravity * dt;

  const double kinetic = 0.5 * t.mass * (vx * vx + vy0 * vy0 + vz0 * vz0);
  return kinetic + trap_potential(t, x, y, z) < 0.0;
}

TrapShape make_trap_shape(double temperature, const TrapSpec& trap,
                          const PhysicalConstants& constants,
                          double axial_frequency) {
  const double omega_ax =
      axial_frequency > 0.0 ? axial_frequency : trap.omega_trap / 5.0;
  TrapShape t;
  t.depth = trap.depth;
  t.waist = trap.waist;
  t.mass = constants.atom_mass;
  t.gravity = constants.gravity;
  t.rayleigh = std::sqrt(2.0 * trap.depth / (t.mass * omega_ax * omega_ax));
  const double sv = std::sqrt(constants.k_boltzmann * temperature / t.mass);
  t.sigma_v = sv;
  t.sigma_r = sv / trap.omega_trap;
  t.sigma_ax = sv / omega_ax;
  return t;
}

ReleaseRecaptureCurve release_recapture_impl(
    double temperature, const TrapSpec& trap,
    const PhysicalConstants& constants, std::span<const double> release_times,
    long n_samples, std::uint64_t seed, double axial_frequency, int workers,
    bool parallel) {
  if (temperature < 0.0) {
    throw InvalidParameterError("release_recapture: temperature must be >= 0");
  }
  if (n_samples < 1) {
    throw InvalidParameterError("release_recapture: n_samples must be >= 1");
  }
  for (std::size_t i = 0; i + 1 < release_times.size(); ++i) {
    if (!(release_times[i] <= release_times[i + 1])) {
      throw InvalidParameterError("release_recapture: times must ascend");
    }
  }
  for (double t : release_times) {
    if (t < 0.0) throw InvalidParameterError("release_recapture: times must be >= 0");
  }

  const TrapShape shape = make_trap_shape(temperature, trap, constants, axial_frequency);
  const rng::Substream stream(seed);

  ReleaseRecaptureCurve curve;
  curve.release_times.assign(release_times.begin(), release_times.end());
  curve.n_samples = n_samples;
  curve.seed = seed;
  curve.survival.assign(release_times.size(), 0.0);

  std::vector<long> counts(release_times.size(), 0);
  const auto n_times = static_cast<std::int64_t>(release_times.size());
  if (parallel) {
#pragma omp parallel for schedule(static) num_threads(resolve_workers(workers))
    for (std::int64_t ti = 0; ti < n_times; ++ti) {
      long c = 0;
      for (long k = 0; k < n_samples; ++k) {
        c += recaptured(shape, stream, static_cast<std::uint64_t>(ti),
                        static_cast<std::uint64_t>(k),
                        release_times[static_cast<std::size_t>(ti)]);
      }
      counts[static_cast<std::size_t>(ti)] = c;
    }
  } else {
    for (std::int64_t ti = 0; ti < n_times; ++ti) {
      long c = 0;
      for (long k = 0; k < n_samples; ++k) {
        c += recaptured(shape, stream, static_cast<std::uint64_t>(ti),
                        static_cast<std::uint64_t>(k),
                        release_times[static_cast<std::size_t>(ti)]);
      }
      counts[static_cast<std::size_t>(ti)] = c;
    }
  }
  for (std::size_t i = 0; i < counts.size(); ++i) {
    curve.survival[i] = static_cast<double>(counts[i]) / static_cast<double>(n_samples);
  }
  return curve;
}

}  // namespace

ReleaseRecaptureCurve release_recapture_simulate(
    double temperature, const TrapSpec& trap,
    const PhysicalConstants& constants, std::span<const double> release_times,
    long n_samples, std::uint64_t seed, double axial_frequency, int workers) {
  return release_recapture_impl(temperature, trap, constants, release_times,
                                n_samples, seed, axial_frequency, workers, true);
}

namespace serial {
ReleaseRecaptureCurve release_recapture_simulate(
    double temperature, const TrapSpec& trap,
    const PhysicalConstants& constants, std::span<const double> release_times,
    long n_samples, std::uint64_t seed, double axial_frequency) {
  return release_recapture_impl(temperature, trap, constants, release_times,
                                n_samples, seed, axial_frequency, 1, false);
}
}  // namespace serial

namespace {

double chi2_against_curve(const ReleaseRecaptureCurve& observed,
                          const ReleaseRecaptureCurve& simulated) {
  double chi2 = 0.0;
  for (std::size_t i = 0; i < observed.survival.size(); ++i) {
    const double so = observed.survival[i];
    // variance floor keeps endpoints at s = 0 or 1 from dominating
    const double var =
        std::max(so * (1.0 - so), 0.02) / static_cast<double>(observed.n_samples);
    const double d = so - simulated.survival[i];
    chi2 += d * d / var;
  }
  return chi2;
}

void check_observed(const ReleaseRecaptureCurve& observed) {
  if (observed.release_times.size() < 3) {
    throw InvalidParameterError("fit_temperature: need >= 3 release times");
  }
  if (observed.release_times.size() != observed.survival.size()) {
    throw InvalidParameterError("fit_temperature: times/survival size mismatch");
  }
  if (observed.n_samples < 1) {
    throw InvalidParameterError("fit_temperature: n_samples must be >= 1");
  }
  const auto [lo, hi] = std::minmax_element(observed.survival.begin(),
                                            observed.survival.end());
  if (*hi - *lo < 0.2) {
    throw InsufficientSignalError(
        "fit_temperature: observed survival spans only " +
        std::to_string(*hi - *lo) + "; need a drop of at least 0.2");
  }
}

}  // namespace

double thermometry_chi2(const ReleaseRecaptureCurve& observed,
                        double temperature, const TrapSpec& trap,
                        const PhysicalConstants& constants,
                        const ThermometryOptions& options) {
  const auto sim = release_recapture_simulate(
      temperature, trap, constants, observed.release_times,
      options.inner_samples, options.inner_seed, options.axial_frequency,
      options.workers);
  return chi2_against_curve(observed, sim);
}

namespace {

struct GoldenResult {
  double theta = 0.0;
  double value = 0.0;
  int iterations = 0;
  bool at_bound = false;
};

template <typename F>
GoldenResult golden_section(F&& f, double lo, double hi, double tol) {
  constexpr double invphi = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  int iters = 0;
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
    ++iters;
    if (iters > 200) break;
  }
  GoldenResult g;
  g.theta = 0.5 * (a + b);
  g.value = fc <= fd ? fc : fd;
  g.iterations = iters;
  // pinned to an edge of the search range: objective jitter can keep the
  // bracket a few tolerances off the bound, so flag by range fraction
  const double margin = std::max(4.0 * tol, 0.02 * (hi - lo));
  g.at_bound = (g.theta - lo < margin) || (hi - g.theta < margin);
  return g;
}

}  // namespace

FitResult fit_temperature(const ReleaseRecaptureCurve& observed,
                          const TrapSpec& trap,
                          const PhysicalConstants& constants,
                          const ThermometryOptions& options) {
  check_observed(observed);
  if (!(options.t_min > 0.0) || !(options.t_max > options.t_min)) {
    throw InvalidParameterError("fit_temperature: bad search bounds");
  }

  auto objective = [&](const ReleaseRecaptureCurve& data) {
    return [&, data](double theta) {
      return thermometry_chi2(data, std::exp(theta), trap, constants, options);
    };
  };

  const double lo = std::log(options.t_min), hi = std::log(options.t_max);
  const auto fit = golden_section(objective(observed), lo, hi, options.log_tol);
  const double t_hat = std::exp(fit.theta);

  // bootstrap: binomial resamples of the observed fractions, refit each
  double se = 0.0;
  if (options.bootstrap_resamples > 1) {
    const rng::Substream boot =
        rng::Substream(observed.seed).fork(rng::stage::bootstrap);
    std::vector<double> estimates;
    estimates.reserve(options.bootstrap_resamples);
    for (int b = 0; b < options.bootstrap_resamples; ++b) {
      ReleaseRecaptureCurve resampled = observed;
      const auto bs = boot.fork(static_cast<std::uint64_t>(b));
      for (std::size_t i = 0; i < resampled.survival.size(); ++i) {
        const auto ps = bs.fork(i);
        long hits = 0;
        for (long k = 0; k < observed.n_samples; ++k) {
          hits += ps.bernoulli(static_cast<std::uint64_t>(k),
                               observed.survival[i]);
        }
        resampled.survival[i] =
            static_cast<double>(hits) / static_cast<double>(observed.n_samples);
      }
      const auto bfit = golden_section(objective(resampled), lo, hi, options.log_tol);
      estimates.push_back(std::exp(bfit.theta));
    }
    double mean = 0.0;
    for (double e : estimates) mean += e;
    mean /= static_cast<double>(estimates.size());
    double var = 0.0;
    for (double e : estimates) var += (e - mean) * (e - mean);
    var /= static_cast<double>(estimates.size() - 1);
    se = std::sqrt(var);
  }

  FitResult result;
  result.params["temperature"] = t_hat;
  result.std_errors["temperature"] = se;
  result.residual_norm = std::sqrt(fit.value);
  result.iterations = fit.iterations;
  result.converged = !fit.at_bound;
  return result;
}

}  // namespace atomscope
