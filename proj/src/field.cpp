#include "atomscope/field.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "atomscope/csv.hpp"
#include "atomscope/errors.hpp"

namespace atomscope {

void AnalyticEvanescentModel::validate() const {
  if (power < 0.0 || !std::isfinite(power)) {
    throw InvalidParameterError("field: power must be >= 0");
  }
  if (!(decay_length > 0.0)) {
    throw InvalidParameterError("field: decay_length must be > 0");
  }
  if (!(r_min > 0.0)) throw InvalidParameterError("field: r_min must be > 0");
}

double intensity_analytic(const AnalyticEvanescentModel& model, double r) {
  model.validate();
  if (r < model.r_min) {
    throw OutOfDomainError(
        "intensity_analytic: r = " + std::to_string(r) +
        " m is inside the validity cutoff r_min = " +
        std::to_string(model.r_min) + " m (asymptotic law invalid near the core)");
  }
  return model.power / (units::pi * model.decay_length) / r *
         std::exp(-2.0 * r / model.decay_length);
}

namespace {

void check_uniform(const std::vector<double>& grid, const char* name) {
  if (grid.size() < 2) {
    throw InvalidParameterError(std::string("tabulated mode: ") + name +
                                " grid needs at least 2 points");
  }
  const double step = grid[1] - grid[0];
  if (!(step > 0.0)) {
    throw InvalidParameterError(std::string("tabulated mode: ") + name +
                                " grid must be strictly ascending");
  }
  for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
    const double s = grid[i + 1] - grid[i];
    if (!(s > 0.0) || std::abs(s - step) > 1e-9 * std::abs(step)) {
      throw InvalidParameterError(std::string("tabulated mode: ") + name +
                                  " grid spacing not uniform at index " +
                                  std::to_string(i));
    }
  }
}

// Index of the cell containing x, clamped to the last interior cell so a
// query at the upper edge uses t = 1 against the final node.
std::size_t cell_index(const std::vector<double>& grid, double x) {
  auto it = std::upper_bound(grid.begin(), grid.end(), x);
  std::size_t i = (it == grid.begin()) ? 0 : static_cast<std::size_t>(it - grid.begin()) - 1;
  return std::min(i, grid.size() - 2);
}

}  // namespace

TabulatedMode::TabulatedMode(std::vector<double> y_grid,
                             std::vector<double> z_grid,
                             std::vector<double> values,
                             double core_width, double core_height)
    : y_grid_(std::move(y_grid)),
      z_grid_(std::move(z_grid)),
      values_(std::move(values)),
      core_width_(core_width),
      core_height_(core_height) {
  check_uniform(y_grid_, "y");
  check_uniform(z_grid_, "z");
  if (values_.size() != y_grid_.size() * z_grid_.size()) {
    throw InvalidParameterError("tabulated mode: grid/value size mismatch");
  }
  for (double v : values_) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw InvalidParameterError("tabulated mode: intensities must be >= 0");
    }
  }
  if (!(core_width_ > 0.0) || !(core_height_ > 0.0)) {
    throw InvalidParameterError("tabulated mode: core cross-section must be > 0");
  }
}

TabulatedMode TabulatedMode::from_csv(const std::filesystem::path& file) {
  csv::Table table = csv::read_file(file);
  const auto cy = table.column("y_nm");
  const auto cz = table.column("z_nm");
  const auto ci = table.column("intensity_per_W");

  const std::size_t n_rows = table.row_count();
  std::vector<double> row_y(n_rows), row_z(n_rows), row_i(n_rows);
  std::set<double> ys, zs;
  for (std::size_t r = 0; r < n_rows; ++r) {
    row_y[r] = table.number(r, cy) * units::nm;
    row_z[r] = table.number(r, cz) * units::nm;
    row_i[r] = table.number(r, ci);
    ys.insert(row_y[r]);
    zs.insert(row_z[r]);
  }
  std::vector<double> y_grid(ys.begin(), ys.end());
  std::vector<double> z_grid(zs.begin(), zs.end());
  if (n_rows != y_grid.size() * z_grid.size()) {
    throw ParseError(file.string() + ": grid is not a complete rectangle (" +
                     std::to_string(n_rows) + " rows for " +
                     std::to_string(y_grid.size()) + " x " +
                     std::to_string(z_grid.size()) + " nodes)");
  }

  std::vector<double> values(n_rows, -1.0);  // sentinel marks unseen nodes
  auto index_of = [](const std::vector<double>& grid, double v) {
    auto it = std::lower_bound(grid.begin(), grid.end(), v);
    return static_cast<std::size_t>(it - grid.begin());
  };
  for (std::size_t r = 0; r < n_rows; ++r) {
    const std::size_t iy = index_of(y_grid, row_y[r]);
    const std::size_t iz = index_of(z_grid, row_z[r]);
    const std::size_t k = iy * z_grid.size() + iz;
    if (values[k] >= 0.0) {
      throw ParseError(file.string() + ": duplicate grid node");
    }
    values[k] = row_i[r];
  }

  double core_w = 180e-9, core_h = 200e-9;
  if (auto it = table.comments.find("core_width_nm"); it != table.comments.end()) {
    core_w = std::stod(it->second) * units::nm;
  }
  if (auto it = table.comments.find("core_height_nm"); it != table.comments.end()) {
    core_h = std::stod(it->second) * units::nm;
  }
  return TabulatedMode(std::move(y_grid), std::move(z_grid), std::move(values),
                       core_w, core_h);
}

double TabulatedMode::sample(double y, double z, double power) const {
  if (power < 0.0) throw InvalidParameterError("sample: power must be >= 0");
  if (y < y_grid_.front() || y > y_grid_.back() || z < z_grid_.front() ||
      z > z_grid_.back()) {
    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "sample_tabulated: query (%.6g, %.6g) m outside the "
                  "tabulated grid (no extrapolation)",
                  y, z);
    throw OutOfDomainError(buf);
  }
  const std::size_t iy = cell_index(y_grid_, y);
  const std::size_t iz = cell_index(z_grid_, z);
  const double ty = (y - y_grid_[iy]) / (y_grid_[iy + 1] - y_grid_[iy]);
  const double tz = (z - z_grid_[iz]) / (z_grid_[iz + 1] - z_grid_[iz]);
  const std::size_t nz = z_grid_.size();
  const double v00 = values_[iy * nz + iz];
  const double v01 = values_[iy * nz + iz + 1];
  const double v10 = values_[(iy + 1) * nz + iz];
  const double v11 = values_[(iy + 1) * nz + iz + 1];
  const double v = (1.0 - ty) * ((1.0 - tz) * v00 + tz * v01) +
                   ty * ((1.0 - tz) * v10 + tz * v11);
  return v * power;
}

double sample_tabulated(const TabulatedMode& mode, double y, double z,
                        double power) {
  return mode.sample(y, z, power);
}

double field_intensity(const FieldModel& field, double y, double z) {
  return std::visit(
      [&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, AnalyticEvanescentModel>) {
          return intensity_analytic(m, std::hypot(y, z));
        } else {
          return m.mode.sample(y, z, m.power);
        }
      },
      field);
}

SaturationContext SaturationContext::from_constants(
    const PhysicalConstants& constants) {
  constants.validate();
  SaturationContext sat;
  sat.gamma = constants.gamma;
  sat.sigma_0 = constants.sigma_0;
  sat.omega_0 = constants.omega_0;
  sat.i_sat = constants.hbar * constants.omega_0 * constants.gamma /
              (2.0 * constants.sigma_0);
  return sat;
}

double optical_depth(double sigma_0, double intensity, double power) {
  if (!(power > 0.0)) {
    throw InvalidParameterError("optical_depth: OD is defined per unit guided "
                                "power; power must be > 0");
  }
  if (sigma_0 < 0.0 || intensity < 0.0) {
    throw InvalidParameterError("optical_depth: sigma_0 and intensity must be >= 0");
  }
  return sigma_0 * intensity / power;
}

double scattering_rate(double intensity, const SaturationContext& sat) {
  if (intensity < 0.0 || !std::isfinite(intensity)) {
    throw InvalidParameterError("scattering_rate: intensity must be >= 0");
  }
  const double s = intensity / sat.i_sat;
  return 0.5 * sat.gamma * s / (1.0 + s);
}

}  // namespace atomscope
