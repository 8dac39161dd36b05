#include "atomscope/motion.hpp"

#include <cmath>

#include "atomscope/errors.hpp"

namespace atomscope {

namespace {

// Forward kinematics of the acceleration half (jerk up, hold, jerk down),
// valid for t in [0, 2*tj + th].
MotionProfile::Sample accel_half(double t, double a_pk, double tj, double th) {
  const double jerk = a_pk / tj;
  MotionProfile::Sample s;
  s.time = t;
  if (t <= tj) {
    s.acceleration = jerk * t;
    s.velocity = 0.5 * jerk * t * t;
    s.position = jerk * t * t * t / 6.0;
    return s;
  }
  const double v1 = 0.5 * a_pk * tj;
  const double x1 = a_pk * tj * tj / 6.0;
  if (t <= tj + th) {
    const double u = t - tj;
    s.acceleration = a_pk;
    s.velocity = v1 + a_pk * u;
    s.position = x1 + v1 * u + 0.5 * a_pk * u * u;
    return s;
  }
  const double v2 = v1 + a_pk * th;
  const double x2 = x1 + v1 * th + 0.5 * a_pk * th * th;
  const double u = t - tj - th;
  s.acceleration = a_pk - jerk * u;
  s.velocity = v2 + a_pk * u - 0.5 * jerk * u * u;
  s.position = x2 + v2 * u + 0.5 * a_pk * u * u - jerk * u * u * u / 6.0;
  return s;
}

}  // namespace

MotionProfile::Sample MotionProfile::at(double t) const {
  Sample s;
  if (samples.empty()) return s;
  if (t <= 0.0) {
    s.time = t;
    return s;
  }
  if (t >= duration) {
    s.time = t;
    s.position = distance_;
    return s;
  }
  const double t_accel = 2.0 * jerk_time + hold_time_;
  const double half = 0.5 * duration;
  if (t <= half) {
    if (t <= t_accel) {
      s = accel_half(t, a_peak, jerk_time, hold_time_);
    } else {
      const auto end = accel_half(t_accel, a_peak, jerk_time, hold_time_);
      s.position = end.position + v_peak * (t - t_accel);
      s.velocity = v_peak;
      s.acceleration = 0.0;
    }
    s.time = t;
    return s;
  }
  // mirror: x(t) = distance - x(T - t), v(t) = v(T - t), a(t) = -a(T - t)
  Sample m = at(duration - t);
  s.time = t;
  s.position = distance_ - m.position;
  s.velocity = m.velocity;
  s.acceleration = -m.acceleration;
  return s;
}

MotionProfile transport_profile(double distance, double v_max, double a_max,
                                double jerk_time, double dt) {
  if (distance < 0.0 || !std::isfinite(distance)) {
    throw InvalidParameterError("transport_profile: distance must be >= 0");
  }
  if (!(v_max > 0.0) || !(a_max > 0.0) || !(jerk_time > 0.0) || !(dt > 0.0)) {
    throw InvalidParameterError(
        "transport_profile: v_max, a_max, jerk_time, dt must be > 0");
  }

  MotionProfile p;
  p.v_max = v_max;
  p.a_max = a_max;
  p.jerk_time = jerk_time;
  p.distance_ = distance;

  if (distance == 0.0) {
    p.samples.push_back({});
    return p;
  }

  const double tj = jerk_time;
  // peak velocity the limits allow
  double a_pk = a_max;
  double v_pk, th;
  if (v_max >= a_max * tj) {
    v_pk = v_max;
    th = v_max / a_max - tj;
  } else {
    a_pk = v_max / tj;  // a_max unreachable before v_max
    v_pk = v_max;
    th = 0.0;
  }
  double t_cruise = distance / v_pk - (2.0 * tj + th);
  if (t_cruise < 0.0) {
    t_cruise = 0.0;
    // shorten to the distance: d = v_pk (tj + v_pk / a_pk) while th >= 0
    v_pk = 0.5 * a_pk * (-tj + std::sqrt(tj * tj + 4.0 * distance / a_pk));
    if (v_pk >= a_pk * tj) {
      th = v_pk / a_pk - tj;
    } else {
      // pure jerk segments: d = 2 a_pk tj^2
      th = 0.0;
      a_pk = distance / (2.0 * tj * tj);
      v_pk = a_pk * tj;
      p.accel_reduced = a_pk < a_max;
    }
  }

  p.a_peak = a_pk;
  p.v_peak = v_pk;
  p.hold_time_ = th;
  p.duration = 2.0 * (2.0 * tj + th) + t_cruise;

  if (p.duration / dt > 5e7) {
    throw InvalidParameterError("transport_profile: dt yields more than 5e7 samples");
  }
  const auto n_steps = static_cast<std::size_t>(std::floor(p.duration / dt));
  p.samples.reserve(n_steps + 2);
  for (std::size_t i = 0; i <= n_steps; ++i) {
    p.samples.push_back(p.at(static_cast<double>(i) * dt));
  }
  if (p.samples.back().time < p.duration) {
    p.samples.push_back(p.at(p.duration));
  }
  return p;
}

}  // namespace atomscope
