#include "atomscope/quantities.hpp"

#include <cmath>

#include "atomscope/errors.hpp"

namespace atomscope {

double PhysicalConstants::derived_omega_recoil() const {
  const double k = units::two_pi / wavelength_d2;
  return hbar * k * k / (2.0 * atom_mass);
}

PhysicalConstants PhysicalConstants::cesium_d2() {
  PhysicalConstants c;
  c.omega_0 = c.derived_omega_0();
  c.sigma_0 = c.derived_sigma_0();
  c.validate();
  return c;
}

void PhysicalConstants::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw InvalidParameterError(std::string("constants: ") + name +
                                  " must be strictly positive");
    }
  };
  positive(hbar, "hbar");
  positive(k_boltzmann, "k_boltzmann");
  positive(atom_mass, "atom_mass");
  positive(wavelength_d2, "wavelength_d2");
  positive(gamma, "gamma");
  positive(omega_0, "omega_0");
  // omega_recoil = 0 is the recoil-free limit (eta = 0), kept admissible
  if (omega_recoil < 0.0 || !std::isfinite(omega_recoil)) {
    throw InvalidParameterError("constants: omega_recoil must be >= 0");
  }
  positive(sigma_0, "sigma_0");
  positive(gravity, "gravity");
}

void TrapSpec::validate(const PhysicalConstants& constants) const {
  if (!(depth > 0.0)) throw InvalidParameterError("trap: depth must be > 0");
  if (!(omega_trap > 0.0)) {
    throw InvalidParameterError("trap: omega_trap must be > 0");
  }
  if (!(waist > 0.0)) throw InvalidParameterError("trap: waist must be > 0");
  if (n_trunc < 2) throw InvalidParameterError("trap: n_trunc must be >= 2");
  const int bound = bound_state_count(depth, omega_trap, constants);
  if (n_trunc > bound) {
    throw InvalidParameterError(
        "trap: n_trunc exceeds the number of bound states (" +
        std::to_string(bound) + ")");
  }
}

double lamb_dicke(const PhysicalConstants& constants, const TrapSpec& trap) {
  if (!(trap.omega_trap > 0.0)) {
    throw InvalidParameterError("lamb_dicke: omega_trap must be > 0");
  }
  if (constants.omega_recoil < 0.0) {
    throw InvalidParameterError("lamb_dicke: omega_recoil must be >= 0");
  }
  return std::sqrt(constants.omega_recoil / trap.omega_trap);
}

int bound_state_count(double depth, double omega_trap,
                      const PhysicalConstants& constants) {
  if (!(depth > 0.0) || !(omega_trap > 0.0)) {
    throw InvalidParameterError(
        "bound_state_count: depth and omega_trap must be > 0");
  }
  return static_cast<int>(std::floor(depth / (constants.hbar * omega_trap)));
}

}  // namespace atomscope
