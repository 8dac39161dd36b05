#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "atomscope/field.hpp"
#include "atomscope/franck_condon.hpp"
#include "atomscope/quantities.hpp"

// Scattering-driven heating over the truncated oscillator ladder: thermal
// initialization, repeated Franck-Condon redistribution, and the survival
// probability (total retained population) after a resonant pulse. Motion is
// one-dimensional along the scan axis at the radial trap frequency.

namespace atomscope {

struct MotionalState {
  std::vector<double> pop;  // pop[n] = probability of motional level n

  int size() const { return static_cast<int>(pop.size()); }
  double total() const;
  double mean_occupation() const;  // over retained population
};

// Boltzmann occupation exp(-n hbar w / kT), normalized over the full bound
// ladder, then truncated to trap.n_trunc. T = 0 gives the ground state.
MotionalState thermal_state(double temperature, const TrapSpec& trap,
                            const PhysicalConstants& constants);

enum class ApplyMethod { kAuto, kDirect, kBinaryExponentiation };

// fc^k applied to the state. kAuto multiplies directly for k <= 64 and
// switches to binary exponentiation of the matrix above that.
MotionalState apply_events(const MotionalState& state,
                           const FranckCondonMatrix& fc, std::uint64_t k,
                           ApplyMethod method = ApplyMethod::kAuto,
                           int workers = 0);

// Retained population after a pulse with expected event count N = rate *
// duration: the Poisson mixture over event counts for N <= 50 and the
// deterministic round(N)-event evolution above (Poisson spread is negligible
// against the curve there).
double survival_probability(const MotionalState& initial,
                            const FranckCondonMatrix& fc, double rate,
                            double duration);

inline constexpr double kPoissonBranchMaxEvents = 50.0;

struct SurvivalCurvePoint {
  double coordinate = 0.0;     // scan position (m) or pulse duration (s)
  double survival = 0.0;       // retained population, in [0, 1]
  double n_events_mean = 0.0;  // R_sc * duration
  double intensity = 0.0;      // W/m^2 at the trap center
  double saturation = 0.0;     // s = I / I_sat
  double rate = 0.0;           // R_sc, events/s
};

// Shared forward model for batch evaluation: one Franck-Condon power cache
// serves every site. Thread-safe for concurrent queries.
class HeatingForward {
 public:
  HeatingForward(const FranckCondonMatrix& fc, MotionalState initial,
                 SaturationContext sat, double duration, int workers = 0);

  // Raw retained population after the pulse at local intensity I.
  double survival_for_intensity(double intensity) const;
  // Retained population relative to the zero-duration value.
  double normalized_survival_for_intensity(double intensity) const;

  SurvivalCurvePoint point_for_intensity(double coordinate,
                                         double intensity) const;

  double initial_total() const { return initial_total_; }
  double duration() const { return duration_; }
  const SaturationContext& saturation() const { return sat_; }

 private:
  std::vector<double> apply_pow(std::uint64_t k) const;  // fc^k * initial

  int size_;
  std::vector<std::vector<double>> pow2_;  // fc^(2^j)
  MotionalState initial_;
  double initial_total_;
  SaturationContext sat_;
  double duration_;
};

struct SitePosition {
  double y = 0.0;  // m, in the transverse plane of the waveguide
  double z = 0.0;
};

// Optional model variants; both off by default.
struct HeatingModelOptions {
  // two Franck-Condon applications per scattering event (absorption and
  // emission kicks) instead of the single application the methods describe
  bool double_kick = false;
  // average the intensity over the thermal position spread (1-sigma width
  // in meters along the scan axis) instead of the trap-center value; 0 = off
  double position_sigma = 0.0;
};

// Intensity averaged over a Gaussian position spread along y (9-point
// Gauss-Hermite); sigma = 0 returns the center value.
double gaussian_average_intensity(const FieldModel& field, double y, double z,
                                  double sigma);

// Survival at each trap site for a fixed pulse: evaluates the field at the
// trap center, forms s and R_sc, and runs the heating model. Sites are
// independent and evaluated concurrently.
std::vector<SurvivalCurvePoint> survival_vs_position(
    std::span<const SitePosition> sites, const FieldModel& field,
    const SaturationContext& sat, const TrapSpec& trap,
    const PhysicalConstants& constants, double temperature, double duration,
    int workers = 0, const HeatingModelOptions& options = {});

namespace serial {
std::vector<SurvivalCurvePoint> survival_vs_position(
    std::span<const SitePosition> sites, const FieldModel& field,
    const SaturationContext& sat, const TrapSpec& trap,
    const PhysicalConstants& constants, double temperature, double duration,
    const HeatingModelOptions& options = {});
}

}  // namespace atomscope
