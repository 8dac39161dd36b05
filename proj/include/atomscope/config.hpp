#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "atomscope/field.hpp"
#include "atomscope/geometry.hpp"
#include "atomscope/quantities.hpp"
#include "atomscope/scan.hpp"

// Run configuration: one JSON document with explicit unit-suffixed keys
// (decay_length_nm, power_pW, ...). Blocks keep the values exactly as
// given and convert to SI only when building domain objects, so the
// resolved-config echo reproduces runs bit-for-bit. Unknown keys are
// errors.

namespace atomscope {

struct ConstantsConfig {
  double hbar_J_s = 1.054571817e-34;
  double k_boltzmann_J_K = 1.380649e-23;
  double atom_mass_kg = 2.2069465e-25;
  double wavelength_d2_nm = 852.347;
  double gamma_2pi_MHz = 5.2227;
  double omega_recoil_2pi_kHz = 2.0663;
  double gravity_m_s2 = 9.81;
  std::optional<double> omega_0_2pi_THz;  // default: derived from wavelength
  std::optional<double> sigma_0_m2;       // default: 3 lambda^2 / 2pi

  PhysicalConstants build() const;
};

struct TrapConfig {
  double depth_uK = 340.0;
  double omega_trap_2pi_kHz = 30.1;
  double waist_um = 1.2;
  int n_trunc = 130;

  TrapSpec build(const PhysicalConstants& constants) const;
};

struct FieldConfig {
  std::string model = "analytic";  // "analytic" | "tabulated"
  double power_pW = 400.0;
  double decay_length_nm = 743.0;
  double r_min_nm = 90.0;
  std::string mode_file;  // tabulated only

  FieldModel build(const std::filesystem::path& base_dir) const;
  double r_min() const;
  double power() const;
};

struct ArrayConfig {
  int rows = 1;
  int cols = 1;
  double pitch_um = 5.0;
  std::array<double, 3> origin_um = {0.0, 0.0, 0.0};
  double waist_um = 1.2;
  double aod_calibration_um_per_MHz = 0.5;

  TweezerArray build() const;
};

struct ScanConfig {
  // exactly one unit family: *_um or *_MHz
  std::optional<double> start_um, stop_um, step_um;
  std::optional<double> start_MHz, stop_MHz, step_MHz;
  long shots = 200;
  std::uint64_t seed = 0;

  bool in_mhz() const { return start_MHz.has_value(); }
  // scan displacements in meters (MHz scans go through the AOD calibration)
  std::vector<double> coordinates(const TweezerArray& array) const;
};

struct HeatingConfig {
  double temperature_uK = 40.0;
  double pulse_ms = 6.0;
  std::optional<int> n_trunc;  // overrides trap.n_trunc for the heating model
  bool double_kick = false;        // two kicks per scattering event
  bool position_averaging = false; // average intensity over the thermal spread

  double temperature() const;
  double pulse() const;
};

struct LoadingConfig {
  double fill_probability = 0.5;
  double transport_survival = 0.92;

  LoadingModel build(long shots, std::uint64_t seed) const;
};

struct FitConfig {
  std::string kind;  // "decay" | "temperature" | "tilt"
  bool free_prefactor = false;
  int max_iterations = 50;
  long inner_samples = 10000;
  int bootstrap = 20;
  double t_min_uK = 0.1;
  double t_max_uK = 2000.0;
  std::optional<double> axial_frequency_2pi_kHz;
  std::uint64_t seed = 0;
};

struct RunConfig {
  ConstantsConfig constants;
  TrapConfig trap;
  std::optional<FieldConfig> field;
  std::optional<std::string> geometry_file;
  std::optional<ArrayConfig> array;
  std::optional<ScanConfig> scan;
  std::optional<HeatingConfig> heating;
  LoadingConfig loading;
  std::optional<FitConfig> fit;
  std::string output_dir = "out";
  std::filesystem::path base_dir;  // directory of the config file

  static RunConfig from_file(const std::filesystem::path& file);

  // Effective configuration (defaults filled in) as a JSON string; parsing
  // it back yields an identical configuration.
  std::string resolved_json() const;

  void validate() const;

  std::filesystem::path resolve_path(const std::string& relative) const;
  DeviceGeometry load_geometry() const;
};

}  // namespace atomscope
