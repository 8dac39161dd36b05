#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "atomscope/geometry.hpp"
#include "atomscope/heating.hpp"

// Forward simulation of scanning-atom-microscope runs: stochastic loading
// and transport, geometric (no-light) loss, optional evanescent-field
// heating loss, and the tilt fit on the resulting survival maps. All
// randomness is counter-based, keyed by (seed, site, coordinate, shot,
// stage), so maps are identical for any worker count.

namespace atomscope {

struct LoadingModel {
  double fill_probability = 0.5;
  double transport_survival = 0.92;
  long shots = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SurvivalMap {
  int rows = 0;
  int cols = 0;
  std::vector<double> coordinates;   // scan coordinate per column of the map
  std::vector<double> survival;      // site-major: [site * n_coords + j]
  std::vector<long> shot_counts;     // same shape

  std::size_t index(int site, std::size_t j) const {
    return static_cast<std::size_t>(site) * coordinates.size() + j;
  }
  int site_count() const { return rows * cols; }

  void write_csv(const std::filesystem::path& file) const;
  static SurvivalMap read_csv(const std::filesystem::path& file);
};

// Heating inputs for scans with guided light. The Franck-Condon matrix
// (pre-squared for the double-kick variant) and initial state are prepared
// once by the caller.
struct HeatingInputs {
  const FieldModel* field = nullptr;
  SaturationContext sat;
  const FranckCondonMatrix* fc = nullptr;
  const MotionalState* initial = nullptr;
  double duration = 0.0;
  double position_sigma = 0.0;  // Gaussian intensity averaging; 0 = off
};

// Per shot and site: Bernoulli loading, Bernoulli transport, then survival
// against the geometric and (optional, normalized) heating losses, combined
// as independent channels. The empirical ratio is survivors / shots.
SurvivalMap simulate_scan(const DeviceGeometry& geometry,
                          const TweezerArray& array,
                          std::span<const double> scan_dy,
                          const HeatingInputs* heating,
                          const LoadingModel& loading, int workers = 0);

namespace serial {
SurvivalMap simulate_scan(const DeviceGeometry& geometry,
                          const TweezerArray& array,
                          std::span<const double> scan_dy,
                          const HeatingInputs* heating,
                          const LoadingModel& loading);
}

struct TiltEstimate {
  double tilt = 0.0;       // rad
  double std_error = 0.0;  // rad
  std::vector<double> row_positions;  // m, along the array row axis
  std::vector<double> row_centers;    // m, loss centroid per row (absolute y)
};

// Loss-weighted centroid per array row (excess loss over the row's baseline
// survival, so uniform loading/transport losses do not bias the centroid),
// then a least-squares line of centroid versus row position; the tilt is
// arctan(slope). Requires >= 2 rows, each showing the loss feature (min
// survival below half the row baseline).
TiltEstimate tilt_estimate(const SurvivalMap& map, const TweezerArray& array);

}  // namespace atomscope
