#pragma once

#include <vector>

// Jerk-limited (smoothed trapezoidal) transport profiles for the tweezer
// focal-plane stage. Acceleration ramps linearly over jerk_time, holds, and
// ramps down; the velocity plateau is clipped to v_max; the second half
// mirrors the first, so the load ends at rest exactly at `distance`.

namespace atomscope {

struct MotionProfile {
  struct Sample {
    double time = 0.0;          // s
    double position = 0.0;      // m
    double velocity = 0.0;      // m/s
    double acceleration = 0.0;  // m/s^2
  };

  std::vector<Sample> samples;
  double v_max = 0.0;      // commanded limits
  double a_max = 0.0;
  double jerk_time = 0.0;
  double v_peak = 0.0;     // achieved
  double a_peak = 0.0;
  double duration = 0.0;   // s
  bool accel_reduced = false;  // peak acceleration lowered to fit the distance

  // Closed-form state at any time in [0, duration].
  Sample at(double t) const;

  double distance() const { return distance_; }

  friend MotionProfile transport_profile(double distance, double v_max,
                                         double a_max, double jerk_time,
                                         double dt);

 private:
  double distance_ = 0.0;
  double hold_time_ = 0.0;  // constant-acceleration segment
};

MotionProfile transport_profile(double distance, double v_max, double a_max,
                                double jerk_time, double dt);

}  // namespace atomscope
