#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "atomscope/quantities.hpp"

// Evanescent-field intensity models: the analytic asymptotic law
// I(r) = (P / pi rho) (1/r) exp(-2 r / rho), valid in the device plane for
// r >= r_min, and tabulated 2-D mode grids (normalized intensity per watt
// of guided power). Plus optical depth, saturation, and scattering rate.
// Models are immutable after construction; all queries are pure.

namespace atomscope {

struct AnalyticEvanescentModel {
  double power = 0.0;         // W, guided power P
  double decay_length = 0.0;  // m, rho
  double r_min = 90e-9;       // m, validity cutoff (core half-width)

  void validate() const;
};

// I(r) for r >= r_min; throws OutOfDomainError inside the cutoff.
double intensity_analytic(const AnalyticEvanescentModel& model, double r);

class TabulatedMode {
 public:
  // Grids ascending and uniform; values[iy * nz + iz] is intensity per watt.
  TabulatedMode(std::vector<double> y_grid, std::vector<double> z_grid,
                std::vector<double> values,
                double core_width = 180e-9, double core_height = 200e-9);

  // CSV with header `y_nm,z_nm,intensity_per_W`, complete rectangular grid.
  static TabulatedMode from_csv(const std::filesystem::path& file);

  // Bilinear interpolation times power; exact at grid nodes; no extrapolation.
  double sample(double y, double z, double power) const;

  const std::vector<double>& y_grid() const { return y_grid_; }
  const std::vector<double>& z_grid() const { return z_grid_; }
  const std::vector<double>& values() const { return values_; }
  double core_width() const { return core_width_; }
  double core_height() const { return core_height_; }

 private:
  std::vector<double> y_grid_;
  std::vector<double> z_grid_;
  std::vector<double> values_;
  double core_width_;
  double core_height_;
};

double sample_tabulated(const TabulatedMode& mode, double y, double z,
                        double power);

// Tabulated mode bound to a guided power, so both field variants answer
// absolute-intensity queries.
struct TabulatedField {
  TabulatedMode mode;
  double power = 0.0;
};

using FieldModel = std::variant<AnalyticEvanescentModel, TabulatedField>;

// Intensity at a point in the transverse plane. The analytic law is radial:
// r = hypot(y, z) measured from the waveguide axis.
double field_intensity(const FieldModel& field, double y, double z);

struct SaturationContext {
  double i_sat = 0.0;    // W/m^2
  double gamma = 0.0;    // rad/s
  double sigma_0 = 0.0;  // m^2
  double omega_0 = 0.0;  // rad/s

  // I_sat = hbar omega_0 gamma / (2 sigma_0)
  static SaturationContext from_constants(const PhysicalConstants& constants);
};

// OD = sigma_0 I / P (per unit guided power)
double optical_depth(double sigma_0, double intensity, double power);

// R_sc = (gamma/2) s / (1 + s), s = I / I_sat
double scattering_rate(double intensity, const SaturationContext& sat);

}  // namespace atomscope
