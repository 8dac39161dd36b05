#include "atomscope/heating.hpp"

#include <cmath>
#include <numeric>

#include "atomscope/errors.hpp"
#include "atomscope/parallel.hpp"

namespace atomscope {

double MotionalState::total() const {
  return std::accumulate(pop.begin(), pop.end(), 0.0);
}

double MotionalState::mean_occupation() const {
  double w = 0.0, s = 0.0;
  for (std::size_t n = 0; n < pop.size(); ++n) {
    w += pop[n];
    s += static_cast<double>(n) * pop[n];
  }
  return w > 0.0 ? s / w : 0.0;
}

MotionalState thermal_state(double temperature, const TrapSpec& trap,
                            const PhysicalConstants& constants) {
  if (temperature < 0.0 || !std::isfinite(temperature)) {
    throw InvalidParameterError("thermal_state: temperature must be >= 0");
  }
  trap.validate(constants);

  MotionalState state;
  state.pop.assign(trap.n_trunc, 0.0);
  if (temperature == 0.0) {
    state.pop[0] = 1.0;
    return state;
  }
  const int n_bound = bound_state_count(trap.depth, trap.omega_trap, constants);
  const double q = std::exp(-constants.hbar * trap.omega_trap /
                            (constants.k_boltzmann * temperature));
  if (q >= 1.0 - 1e-15) {
    // infinite-temperature limit: uniform over the bound ladder
    for (int n = 0; n < trap.n_trunc; ++n) {
      state.pop[n] = 1.0 / static_cast<double>(n_bound);
    }
    return state;
  }
  // geometric weights normalized over the full bound ladder
  const double norm = (1.0 - q) / (1.0 - std::pow(q, n_bound));
  double qn = 1.0;
  for (int n = 0; n < trap.n_trunc; ++n) {
    state.pop[n] = norm * qn;
    qn *= q;
  }
  return state;
}

namespace {

MotionalState apply_direct(const MotionalState& state,
                           const FranckCondonMatrix& fc, std::uint64_t k) {
  MotionalState out = state;
  for (std::uint64_t i = 0; i < k; ++i) {
    out.pop = detail::matrix_apply(fc.probs, out.pop, fc.size);
  }
  return out;
}

MotionalState apply_binexp(const MotionalState& state,
                           const FranckCondonMatrix& fc, std::uint64_t k,
                           int workers) {
  // fc^k by squaring, then one matrix-vector product
  std::vector<double> base = fc.probs;
  std::vector<double> result;  // identity until first set bit
  std::vector<double> tmp;
  bool have_result = false;
  std::uint64_t e = k;
  while (e > 0) {
    if (e & 1ULL) {
      if (!have_result) {
        result = base;
        have_result = true;
      } else {
        detail::matrix_multiply(result, base, tmp, fc.size, workers);
        result.swap(tmp);
      }
    }
    e >>= 1;
    if (e > 0) {
      detail::matrix_multiply(base, base, tmp, fc.size, workers);
      base.swap(tmp);
    }
  }
  MotionalState out;
  out.pop = detail::matrix_apply(result, state.pop, fc.size);
  return out;
}

}  // namespace

MotionalState apply_events(const MotionalState& state,
                           const FranckCondonMatrix& fc, std::uint64_t k,
                           ApplyMethod method, int workers) {
  if (state.size() != fc.size) {
    throw InvalidParameterError(
        "apply_events: state length " + std::to_string(state.size()) +
        " does not match matrix size " + std::to_string(fc.size));
  }
  if (k == 0) return state;
  switch (method) {
    case ApplyMethod::kDirect:
      return apply_direct(state, fc, k);
    case ApplyMethod::kBinaryExponentiation:
      return apply_binexp(state, fc, k, workers);
    case ApplyMethod::kAuto:
    default:
      return k <= 64 ? apply_direct(state, fc, k)
                     : apply_binexp(state, fc, k, workers);
  }
}

namespace {

// Poisson mixture over event counts, truncated once the cumulative mass
// passes 1 - 1e-9. Walks the state forward one event at a time.
double poisson_mixture_survival(const MotionalState& initial,
                                const std::vector<double>& probs, int size,
                                double n_mean) {
  double pmf = std::exp(-n_mean);  // Pois(0; N)
  double cum = pmf;
  std::vector<double> state = initial.pop;
  double total = std::accumulate(state.begin(), state.end(), 0.0);
  double survival = pmf * total;
  std::uint64_t k = 0;
  while (cum < 1.0 - 1e-9 && total > 0.0) {
    ++k;
    state = detail::matrix_apply(probs, state, size);
    total = std::accumulate(state.begin(), state.end(), 0.0);
    pmf *= n_mean / static_cast<double>(k);
    cum += pmf;
    survival += pmf * total;
    if (k > 4096) break;  // unreachable for n_mean <= 50; hard stop
  }
  return survival;
}

}  // namespace

double survival_probability(const MotionalState& initial,
                            const FranckCondonMatrix& fc, double rate,
                            double duration) {
  if (rate < 0.0 || duration < 0.0 || !std::isfinite(rate) ||
      !std::isfinite(duration)) {
    throw InvalidParameterError(
        "survival_probability: rate and duration must be >= 0");
  }
  if (initial.size() != fc.size) {
    throw InvalidParameterError("survival_probability: state/matrix size mismatch");
  }
  const double n_mean = rate * duration;
  double survival;
  if (n_mean == 0.0) {
    survival = initial.total();
  } else if (n_mean <= kPoissonBranchMaxEvents) {
    survival = poisson_mixture_survival(initial, fc.probs, fc.size, n_mean);
  } else {
    const auto k = static_cast<std::uint64_t>(std::llround(n_mean));
    survival = apply_events(initial, fc, k).total();
  }
  if (survival < 0.0) survival = 0.0;
  if (survival > 1.0) survival = 1.0;
  return survival;
}

HeatingForward::HeatingForward(const FranckCondonMatrix& fc,
                               MotionalState initial, SaturationContext sat,
                               double duration, int workers)
    : size_(fc.size),
      initial_(std::move(initial)),
      sat_(sat),
      duration_(duration) {
  if (initial_.size() != fc.size) {
    throw InvalidParameterError("HeatingForward: state/matrix size mismatch");
  }
  if (duration < 0.0) {
    throw InvalidParameterError("HeatingForward: duration must be >= 0");
  }
  initial_total_ = initial_.total();
  // Event counts never exceed (gamma/2) * duration; cache fc^(2^j) up to it.
  const double k_max = 0.5 * sat_.gamma * duration_;
  int levels = 1;
  while (std::ldexp(1.0, levels) < k_max + 1.0 && levels < 63) ++levels;
  pow2_.reserve(levels);
  pow2_.push_back(fc.probs);
  std::vector<double> tmp;
  for (int j = 1; j < levels; ++j) {
    detail::matrix_multiply(pow2_.back(), pow2_.back(), tmp, size_, workers);
    pow2_.push_back(tmp);
  }
}

std::vector<double> HeatingForward::apply_pow(std::uint64_t k) const {
  std::vector<double> state = initial_.pop;
  int j = 0;
  while (k > 0) {
    if (k & 1ULL) {
      state = detail::matrix_apply(pow2_[j], state, size_);
    }
    k >>= 1;
    ++j;
  }
  return state;
}

double HeatingForward::survival_for_intensity(double intensity) const {
  const double rate = scattering_rate(intensity, sat_);
  const double n_mean = rate * duration_;
  double survival;
  if (n_mean == 0.0) {
    survival = initial_total_;
  } else if (n_mean <= kPoissonBranchMaxEvents) {
    survival = poisson_mixture_survival(initial_, pow2_.front(), size_, n_mean);
  } else {
    const auto k = static_cast<std::uint64_t>(std::llround(n_mean));
    const auto state = apply_pow(k);
    survival = std::accumulate(state.begin(), state.end(), 0.0);
  }
  if (survival < 0.0) survival = 0.0;
  if (survival > 1.0) survival = 1.0;
  return survival;
}

double HeatingForward::normalized_survival_for_intensity(double intensity) const {
  if (initial_total_ <= 0.0) return 0.0;
  double s = survival_for_intensity(intensity) / initial_total_;
  return s > 1.0 ? 1.0 : s;
}

SurvivalCurvePoint HeatingForward::point_for_intensity(double coordinate,
                                                       double intensity) const {
  SurvivalCurvePoint p;
  p.coordinate = coordinate;
  p.intensity = intensity;
  p.saturation = intensity / sat_.i_sat;
  p.rate = scattering_rate(intensity, sat_);
  p.n_events_mean = p.rate * duration_;
  p.survival = survival_for_intensity(intensity);
  return p;
}

double gaussian_average_intensity(const FieldModel& field, double y, double z,
                                  double sigma) {
  if (sigma <= 0.0) return field_intensity(field, y, z);
  // 9-point Gauss-Hermite: integral of I(y + x) exp(-x^2 / 2 sigma^2)
  static constexpr double nodes[9] = {
      -3.190993201781528, -2.266580584531843, -1.468553289216668,
      -0.723551018752838, 0.0,                0.723551018752838,
      1.468553289216668,  2.266580584531843,  3.190993201781528};
  static constexpr double weights[9] = {
      3.960697726326438e-05, 4.943624275536947e-03, 8.847452739437657e-02,
      4.326515590025558e-01, 7.202352156060810e-01, 4.326515590025558e-01,
      8.847452739437657e-02, 4.943624275536947e-03, 3.960697726326438e-05};
  constexpr double sqrt_pi = 1.7724538509055160;
  const double scale = std::sqrt(2.0) * sigma;
  double acc = 0.0;
  for (int i = 0; i < 9; ++i) {
    acc += weights[i] * field_intensity(field, y + scale * nodes[i], z);
  }
  return acc / sqrt_pi;
}

namespace {

std::vector<SurvivalCurvePoint> survival_vs_position_impl(
    std::span<const SitePosition> sites, const FieldModel& field,
    const SaturationContext& sat, const TrapSpec& trap,
    const PhysicalConstants& constants, double temperature, double duration,
    int workers, bool parallel, const HeatingModelOptions& options) {
  const double eta = lamb_dicke(constants, trap);
  FranckCondonMatrix fc = franck_condon_matrix(eta, trap.n_trunc, workers);
  if (options.double_kick) fc = double_kick_matrix(fc, workers);
  const MotionalState initial = thermal_state(temperature, trap, constants);
  const HeatingForward forward(fc, initial, sat, duration, workers);

  // Intensities first, so a domain violation names the offending site.
  std::vector<double> intensities(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) {
    try {
      intensities[i] = gaussian_average_intensity(field, sites[i].y,
                                                  sites[i].z,
                                                  options.position_sigma);
    } catch (const OutOfDomainError& e) {
      throw OutOfDomainError("site " + std::to_string(i) + ": " + e.what());
    }
  }

  std::vector<SurvivalCurvePoint> curve(sites.size());
  const auto n = static_cast<std::int64_t>(sites.size());
  if (parallel) {
#pragma omp parallel for schedule(dynamic) num_threads(resolve_workers(workers))
    for (std::int64_t i = 0; i < n; ++i) {
      curve[i] = forward.point_for_intensity(sites[i].y, intensities[i]);
    }
  } else {
    for (std::int64_t i = 0; i < n; ++i) {
      curve[i] = forward.point_for_intensity(sites[i].y, intensities[i]);
    }
  }
  return curve;
}

}  // namespace

std::vector<SurvivalCurvePoint> survival_vs_position(
    std::span<const SitePosition> sites, const FieldModel& field,
    const SaturationContext& sat, const TrapSpec& trap,
    const PhysicalConstants& constants, double temperature, double duration,
    int workers, const HeatingModelOptions& options) {
  return survival_vs_position_impl(sites, field, sat, trap, constants,
                                   temperature, duration, workers, true,
                                   options);
}

namespace serial {
std::vector<SurvivalCurvePoint> survival_vs_position(
    std::span<const SitePosition> sites, const FieldModel& field,
    const SaturationContext& sat, const TrapSpec& trap,
    const PhysicalConstants& constants, double temperature, double duration,
    const HeatingModelOptions& options) {
  return survival_vs_position_impl(sites, field, sat, trap, constants,
                                   temperature, duration, 1, false, options);
}
}  // namespace serial

}  // namespace atomscope
