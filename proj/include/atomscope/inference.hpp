#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "atomscope/quantities.hpp"

// Parameter estimation: decay-length fits of the evanescent intensity law,
// release-recapture thermometry, and the weighted line fit shared with the
// tilt estimator.

namespace atomscope {

struct FitResult {
  std::map<std::string, double> params;
  std::map<std::string, double> std_errors;
  double residual_norm = 0.0;  // sqrt(weighted SSE)
  int iterations = 0;
  bool converged = false;
};

struct IntensitySample {
  double r = 0.0;          // m
  double intensity = 0.0;  // W/m^2
};

struct DecayFitOptions {
  bool free_prefactor = false;  // profile out a free log-amplitude
  int max_iterations = 50;
  double gradient_tol = 1e-12;  // on d(chi2)/d(ln rho)
};

// Least squares on log intensity: minimizes
//   sum_i w_i (ln I_i - ln[(P / pi rho r_i) exp(-2 r_i / rho)])^2
// over ln rho, seeded by the log-linear slope of ln(I r) vs r and refined by
// damped Gauss-Newton. std_errors from the local curvature.
FitResult fit_decay_length(std::span<const IntensitySample> samples,
                           double power,
                           std::span<const double> weights = {},
                           const DecayFitOptions& options = {});

// Model prediction for residual reporting.
double decay_model_log_intensity(double r, double rho, double power,
                                 double log_prefactor_offset = 0.0);

struct ReleaseRecaptureCurve {
  std::vector<double> release_times;  // s, ascending
  std::vector<double> survival;       // recapture fraction per time
  long n_samples = 0;
  std::uint64_t seed = 0;
};

// Monte Carlo release-recapture: positions and velocities drawn from the
// harmonic thermal state (radial omega_T twice, configurable axial, default
// omega_T / 5), ballistic flight under gravity, recapture when the total
// energy in the Gaussian trap (Rayleigh-range axial shape) is negative.
ReleaseRecaptureCurve release_recapture_simulate(
    double temperature, const TrapSpec& trap,
    const PhysicalConstants& constants, std::span<const double> release_times,
    long n_samples, std::uint64_t seed, double axial_frequency = 0.0,
    int workers = 0);

namespace serial {
ReleaseRecaptureCurve release_recapture_simulate(
    double temperature, const TrapSpec& trap,
    const PhysicalConstants& constants, std::span<const double> release_times,
    long n_samples, std::uint64_t seed, double axial_frequency = 0.0);
}

struct ThermometryOptions {
  double t_min = 0.1e-6;          // K, search bounds (log-spaced)
  double t_max = 2000e-6;
  long inner_samples = 10000;     // Monte Carlo size inside the objective
  std::uint64_t inner_seed = 0x713ea2e5ULL;
  int bootstrap_resamples = 20;
  double log_tol = 1e-3;          // golden-section width on ln T
  double axial_frequency = 0.0;
  int workers = 0;
};

// Golden-section search over ln T minimizing chi^2 between the observed
// curve and fixed-seed simulations; bootstrap standard error. converged is
// false when the minimum sits at a search bound.
FitResult fit_temperature(const ReleaseRecaptureCurve& observed,
                          const TrapSpec& trap,
                          const PhysicalConstants& constants,
                          const ThermometryOptions& options = {});

// chi^2 against a fixed-seed simulation at temperature T (exposed for the
// local-minimum sanity checks).
double thermometry_chi2(const ReleaseRecaptureCurve& observed,
                        double temperature, const TrapSpec& trap,
                        const PhysicalConstants& constants,
                        const ThermometryOptions& options = {});

}  // namespace atomscope
