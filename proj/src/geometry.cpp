#include "atomscope/geometry.hpp"

#include <cmath>

#include "atomscope/csv.hpp"
#include "atomscope/errors.hpp"
#include "atomscope/units.hpp"

namespace atomscope {

void DeviceGeometry::validate() const {
  for (const auto& e : elements) {
    if (!(e.half_length > 0.0) || !(e.half_width > 0.0) || !(e.thickness > 0.0)) {
      throw InvalidParameterError("geometry: element '" + e.name +
                                  "' must have positive extents");
    }
  }
  if (!(std::abs(tilt) < 0.1)) {
    throw InvalidParameterError("geometry: |tilt| must be < 0.1 rad");
  }
}

std::array<double, 2> DeviceGeometry::to_device_frame(double x, double y) const {
  const double c = std::cos(tilt);
  const double s = std::sin(tilt);
  // inverse of the device->array rotation by +tilt
  return {c * x + s * y, -s * x + c * y};
}

double DeviceGeometry::signed_axis_offset(double x, double y) const {
  const auto p = to_device_frame(x, y);
  return p[1] * waveguide_axis[0] - p[0] * waveguide_axis[1];
}

double DeviceGeometry::distance_to_axis(double x, double y) const {
  return std::abs(signed_axis_offset(x, y));
}

DeviceGeometry DeviceGeometry::from_csv(const std::filesystem::path& file) {
  csv::Table table = csv::read_file(file);
  DeviceGeometry geom;
  if (auto it = table.comments.find("tilt_deg"); it != table.comments.end()) {
    geom.tilt = units::deg_to_rad(std::stod(it->second));
  }
  if (auto it = table.comments.find("margin_pos_y_um"); it != table.comments.end()) {
    geom.margin_pos_y = std::stod(it->second) * units::um;
  }
  if (auto it = table.comments.find("margin_neg_y_um"); it != table.comments.end()) {
    geom.margin_neg_y = std::stod(it->second) * units::um;
  }

  const auto cname = table.column("name");
  const auto ccx = table.column("cx_um");
  const auto ccy = table.column("cy_um");
  const auto cw = table.column("width_um");
  const auto cl = table.column("length_um");
  const auto ct = table.column("thickness_um");
  for (std::size_t i = 0; i < table.row_count(); ++i) {
    RectElement e;
    e.name = table.rows[i][cname];
    e.cx = table.number(i, ccx) * units::um;
    e.cy = table.number(i, ccy) * units::um;
    e.half_width = 0.5 * table.number(i, cw) * units::um;
    e.half_length = 0.5 * table.number(i, cl) * units::um;
    e.thickness = table.number(i, ct) * units::um;
    geom.elements.push_back(std::move(e));
  }
  geom.validate();
  return geom;
}

void TweezerArray::validate() const {
  if (rows < 1 || cols < 1) {
    throw InvalidParameterError("array: rows and cols must be >= 1");
  }
  if (!(pitch > 0.0)) throw InvalidParameterError("array: pitch must be > 0");
  if (!(waist > 0.0)) throw InvalidParameterError("array: waist must be > 0");
  if (!(aod_calibration > 0.0)) {
    throw InvalidParameterError("array: aod_calibration must be > 0");
  }
  if (!site_offsets.empty() &&
      site_offsets.size() != static_cast<std::size_t>(rows * cols)) {
    throw InvalidParameterError("array: site_offsets must be empty or rows*cols long");
  }
}

std::array<double, 2> TweezerArray::site_position(int row, int col) const {
  double x = origin[0] + row * pitch;
  double y = origin[1] + col * pitch;
  if (!site_offsets.empty()) {
    const auto& off = site_offsets[static_cast<std::size_t>(site_index(row, col))];
    x += off[0];
    y += off[1];
  }
  return {x, y};
}

double aod_to_position(double freq_offset, const TweezerArray& array) {
  if (!std::isfinite(freq_offset)) {
    throw InvalidParameterError("aod_to_position: frequency offset must be finite");
  }
  return array.aod_calibration * freq_offset;
}

namespace {

// Fraction of a unit-power Gaussian (1/e^2 intensity radius w) inside
// [lo, hi] along one axis, center at c.
double axis_fraction(double lo, double hi, double c, double w) {
  const double k = std::sqrt(2.0) / w;
  return 0.5 * (std::erf(k * (hi - c)) - std::erf(k * (lo - c)));
}

}  // namespace

double geometric_survival(double site_x, double site_y,
                          const DeviceGeometry& geometry, double waist) {
  if (!(waist > 0.0)) {
    throw InvalidParameterError("geometric_survival: waist must be > 0");
  }
  const auto p = geometry.to_device_frame(site_x, site_y);
  double occlusion = 0.0;
  for (const auto& e : geometry.elements) {
    const double fx = axis_fraction(e.cx - e.half_length - waist,
                                    e.cx + e.half_length + waist, p[0], waist);
    const double fy =
        axis_fraction(e.cy - e.half_width - waist - geometry.margin_neg_y,
                      e.cy + e.half_width + waist + geometry.margin_pos_y,
                      p[1], waist);
    occlusion += fx * fy;
  }
  if (occlusion > 1.0) occlusion = 1.0;
  return 1.0 - occlusion;
}

}  // namespace atomscope
