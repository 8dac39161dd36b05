#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

// Device geometry and tweezer-array kinematics. The device plane is xy; the
// waveguide's long axis runs along device-frame x. The device frame is
// rotated by `tilt` about z relative to the array frame; array-frame points
// are rotated into the device frame before any overlap test.

namespace atomscope {

struct RectElement {
  std::string name;
  double cx = 0.0;            // m, center, device frame
  double cy = 0.0;
  double half_length = 0.0;   // m, half extent along device x
  double half_width = 0.0;    // m, half extent along device y
  double thickness = 200e-9;  // m, z extent (carried, not used in-plane)
};

struct DeviceGeometry {
  std::vector<RectElement> elements;
  double tilt = 0.0;  // rad, device frame w.r.t. array frame, about z
  std::array<double, 2> waveguide_axis = {1.0, 0.0};  // device frame, unit
  // Phenomenological per-side loss asymmetry: extra margin (m) added to the
  // clipping footprint on the +y / -y side of each element. Default 0.
  double margin_pos_y = 0.0;
  double margin_neg_y = 0.0;

  void validate() const;

  // Array frame -> device frame (rotation by -tilt).
  std::array<double, 2> to_device_frame(double x, double y) const;

  // Signed perpendicular offset of an array-frame point from the waveguide
  // axis line (through the device-frame origin along waveguide_axis);
  // positive on the +y side for the default axis.
  double signed_axis_offset(double x, double y) const;

  // Perpendicular distance from an array-frame point to the waveguide axis.
  double distance_to_axis(double x, double y) const;

  // CSV `name,cx_um,cy_um,width_um,length_um,thickness_um` with a
  // `# tilt_deg=<value>` comment line. width spans device y, length device x.
  static DeviceGeometry from_csv(const std::filesystem::path& file);
};

struct TweezerArray {
  int rows = 1;  // row index runs along array x (the waveguide direction)
  int cols = 1;  // column index runs along array y (the scan direction)
  double pitch = 5e-6;              // m
  std::array<double, 3> origin = {0.0, 0.0, 0.0};
  double waist = 1.2e-6;            // m, 1/e^2 intensity radius
  double aod_calibration = 0.5e-6 / 1e6;  // m/Hz
  std::vector<std::array<double, 2>> site_offsets;  // optional, rows*cols

  void validate() const;

  int site_count() const { return rows * cols; }
  int site_index(int row, int col) const { return row * cols + col; }
  // Array-frame position of a site (before any scan displacement).
  std::array<double, 2> site_position(int row, int col) const;
};

// Position per AOD drive-frequency offset; affine and invertible.
double aod_to_position(double freq_offset, const TweezerArray& array);

// Probability the atom keeps its trap at `site` (array frame, m): the
// Gaussian tweezer (1/e^2 radius = waist) clips a structure element once its
// center comes within one waist of the footprint, so the beam-power erf
// integral is taken over each rectangle dilated by the waist per side; the
// per-element inclusions sum, capped at 1, and survival is 1 - O. Half-loss
// points for a long narrow element sit 2*waist + width apart.
double geometric_survival(double site_x, double site_y,
                          const DeviceGeometry& geometry, double waist);

}  // namespace atomscope
