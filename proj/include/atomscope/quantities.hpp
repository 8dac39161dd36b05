#pragma once

#include "atomscope/units.hpp"

// Physical constants and trap parameters every other module consumes.
// Defaults are the standard Cs D2 reference values. All values SI.
// Immutable value objects: share freely.

namespace atomscope {

struct PhysicalConstants {
  double hbar = 1.054571817e-34;        // J*s
  double k_boltzmann = 1.380649e-23;    // J/K
  double atom_mass = 2.2069465e-25;     // kg, Cs-133
  double wavelength_d2 = 852.347e-9;    // m
  double gamma = units::two_pi * 5.2227e6;        // rad/s, D2 natural linewidth
  double omega_0 = 0.0;                 // rad/s, transition frequency; 0 -> derive 2*pi*c/lambda
  double omega_recoil = units::two_pi * 2.0663e3; // rad/s, free-space recoil
  double sigma_0 = 0.0;                 // m^2, resonant cross-section; 0 -> derive 3*lambda^2/2pi
  double gravity = 9.81;                // m/s^2

  // Fill derived fields (omega_0, sigma_0) from the wavelength and validate.
  static PhysicalConstants cesium_d2();

  void validate() const;

  double derived_omega_0() const {
    return units::two_pi * units::speed_of_light / wavelength_d2;
  }
  double derived_omega_recoil() const;
  double derived_sigma_0() const {
    return 3.0 * wavelength_d2 * wavelength_d2 / units::two_pi;
  }
};

struct TrapSpec {
  double depth = 1.380649e-23 * 340e-6;           // J  (k_B x 340 uK)
  double omega_trap = units::two_pi * 30.1e3;     // rad/s, radial
  double waist = 1.2e-6;                          // m, 1/e^2 intensity radius
  int n_trunc = 130;                              // Hilbert-space truncation

  void validate(const PhysicalConstants& constants) const;
};

// eta = sqrt(omega_recoil / omega_trap)
double lamb_dicke(const PhysicalConstants& constants, const TrapSpec& trap);

// floor(depth / (hbar * omega_trap))
int bound_state_count(double depth, double omega_trap,
                      const PhysicalConstants& constants);

}  // namespace atomscope
