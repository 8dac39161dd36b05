#include "atomscope/scan.hpp"

#include <cmath>

#include "atomscope/csv.hpp"
#include "atomscope/errors.hpp"
#include "atomscope/parallel.hpp"
#include "atomscope/rng.hpp"

namespace atomscope {

void LoadingModel::validate() const {
  if (!(fill_probability >= 0.0 && fill_probability <= 1.0)) {
    throw InvalidParameterError("loading: fill_probability must be in [0, 1]");
  }
  if (!(transport_survival >= 0.0 && transport_survival <= 1.0)) {
    throw InvalidParameterError("loading: transport_survival must be in [0, 1]");
  }
  if (shots < 1) throw InvalidParameterError("loading: shots must be >= 1");
}

void SurvivalMap::write_csv(const std::filesystem::path& file) const {
  csv::Writer w(file, {"site_row", "site_col", "coordinate", "survival", "shots"});
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int site = r * cols + c;
      for (std::size_t j = 0; j < coordinates.size(); ++j) {
        w.row({static_cast<double>(r), static_cast<double>(c), coordinates[j],
               survival[index(site, j)],
               static_cast<double>(shot_counts[index(site, j)])});
      }
    }
  }
}

SurvivalMap SurvivalMap::read_csv(const std::filesystem::path& file) {
  csv::Table t = csv::read_file(file);
  const auto cr = t.column("site_row");
  const auto cc = t.column("site_col");
  const auto cx = t.column("coordinate");
  const auto cs = t.column("survival");
  const auto cn = t.column("shots");

  SurvivalMap map;
  std::vector<double> coords;
  int max_row = -1, max_col = -1;
  for (std::size_t i = 0; i < t.row_count(); ++i) {
    max_row = std::max(max_row, static_cast<int>(t.number(i, cr)));
    max_col = std::max(max_col, static_cast<int>(t.number(i, cc)));
    if (static_cast<int>(t.number(i, cr)) == 0 &&
        static_cast<int>(t.number(i, cc)) == 0) {
      coords.push_back(t.number(i, cx));
    }
  }
  map.rows = max_row + 1;
  map.cols = max_col + 1;
  map.coordinates = coords;
  const std::size_t cells =
      static_cast<std::size_t>(map.site_count()) * coords.size();
  if (t.row_count() != cells) {
    throw ParseError(file.string() + ": incomplete survival map (" +
                     std::to_string(t.row_count()) + " rows, expected " +
                     std::to_string(cells) + ")");
  }
  auto coord_index = [&](double value, std::size_t source_row) {
    for (std::size_t j = 0; j < coords.size(); ++j) {
      if (coords[j] == value) return j;
    }
    throw ParseError(file.string() + ": row " + std::to_string(source_row) +
                     " has a coordinate missing from site (0,0)");
  };
  map.survival.assign(cells, 0.0);
  map.shot_counts.assign(cells, 0);
  for (std::size_t i = 0; i < t.row_count(); ++i) {
    const int site = static_cast<int>(t.number(i, cr)) * map.cols +
                     static_cast<int>(t.number(i, cc));
    const std::size_t j = coord_index(t.number(i, cx), i);
    map.survival[map.index(site, j)] = t.number(i, cs);
    map.shot_counts[map.index(site, j)] = static_cast<long>(t.number(i, cn));
  }
  return map;
}

namespace {

struct CellProbabilities {
  double geometric = 1.0;
  double heating = 1.0;
};

// Loss probabilities for one (site, coordinate) cell. Heating uses the
// normalized survival (a loaded atom loses nothing at zero power) and the
// perpendicular distance to the waveguide axis. Inside the field's validity
// cutoff the geometric loss has to dominate already; if it does not, the
// heating factor cannot be evaluated and the cell is an error.
CellProbabilities cell_probabilities(const DeviceGeometry& geometry,
                                     const TweezerArray& array,
                                     const HeatingForward* forward,
                                     const HeatingInputs* heating, int row,
                                     int col, double dy) {
  CellProbabilities p;
  const auto site = array.site_position(row, col);
  const double y = site[1] + dy;
  p.geometric = geometric_survival(site[0], y, geometry, array.waist);
  if (forward != nullptr) {
    const double offset = geometry.signed_axis_offset(site[0], y);
    try {
      const double intensity = gaussian_average_intensity(
          *heating->field, offset, 0.0, heating->position_sigma);
      p.heating = forward->normalized_survival_for_intensity(intensity);
    } catch (const OutOfDomainError& e) {
      if (p.geometric < 0.5) {
        p.heating = 0.0;  // atom sits on the structure; geometric loss rules
      } else {
        throw OutOfDomainError("site (" + std::to_string(row) + "," +
                               std::to_string(col) + ") at dy = " +
                               std::to_string(dy) + ": " + e.what());
      }
    }
  }
  return p;
}

long run_cell_shots(const CellProbabilities& p, const LoadingModel& loading,
                    const rng::Substream& cell_stream) {
  long survivors = 0;
  for (long shot = 0; shot < loading.shots; ++shot) {
    const auto s = cell_stream.fork(static_cast<std::uint64_t>(shot));
    if (!s.fork(rng::stage::loading).bernoulli(0, loading.fill_probability)) continue;
    if (!s.fork(rng::stage::transport).bernoulli(0, loading.transport_survival)) continue;
    if (!s.fork(rng::stage::geometry).bernoulli(0, p.geometric)) continue;
    if (!s.fork(rng::stage::heating).bernoulli(0, p.heating)) continue;
    ++survivors;
  }
  return survivors;
}

SurvivalMap simulate_scan_impl(const DeviceGeometry& geometry,
                               const TweezerArray& array,
                               std::span<const double> scan_dy,
                               const HeatingInputs* heating,
                               const LoadingModel& loading, int workers,
                               bool parallel) {
  geometry.validate();
  array.validate();
  loading.validate();
  for (double dy : scan_dy) {
    if (!std::isfinite(dy)) {
      throw InvalidParameterError("simulate_scan: scan coordinates must be finite");
    }
  }

  std::optional<HeatingForward> forward;
  if (heating != nullptr) {
    forward.emplace(*heating->fc, *heating->initial, heating->sat,
                    heating->duration, workers);
  }

  SurvivalMap map;
  map.rows = array.rows;
  map.cols = array.cols;
  map.coordinates.assign(scan_dy.begin(), scan_dy.end());
  const std::size_t n_coords = scan_dy.size();
  const std::size_t cells = static_cast<std::size_t>(array.site_count()) * n_coords;
  map.survival.assign(cells, 0.0);
  map.shot_counts.assign(cells, loading.shots);

  const rng::Substream root(loading.seed);
  const auto n_cells = static_cast<std::int64_t>(cells);

  auto run_cell = [&](std::int64_t cell) {
    const int site = static_cast<int>(cell / static_cast<std::int64_t>(n_coords));
    const auto j = static_cast<std::size_t>(cell % static_cast<std::int64_t>(n_coords));
    const int row = site / array.cols;
    const int col = site % array.cols;
    const auto p = cell_probabilities(geometry, array,
                                      forward ? &*forward : nullptr, heating,
                                      row, col, scan_dy[j]);
    const auto cell_stream =
        root.fork(static_cast<std::uint64_t>(site)).fork(static_cast<std::uint64_t>(j));
    const long survivors = run_cell_shots(p, loading, cell_stream);
    map.survival[map.index(site, j)] =
        static_cast<double>(survivors) / static_cast<double>(loading.shots);
  };

  if (parallel) {
    // exceptions may not unwind out of the parallel region; capture one and
    // rethrow after the join
    std::exception_ptr error;
#pragma omp parallel for schedule(dynamic) num_threads(resolve_workers(workers))
    for (std::int64_t cell = 0; cell < n_cells; ++cell) {
      try {
        run_cell(cell);
      } catch (...) {
#pragma omp critical(atomscope_scan_error)
        if (!error) error = std::current_exception();
      }
    }
    if (error) std::rethrow_exception(error);
  } else {
    for (std::int64_t cell = 0; cell < n_cells; ++cell) run_cell(cell);
  }
  return map;
}

}  // namespace

SurvivalMap simulate_scan(const DeviceGeometry& geometry,
                          const TweezerArray& array,
                          std::span<const double> scan_dy,
                          const HeatingInputs* heating,
                          const LoadingModel& loading, int workers) {
  return simulate_scan_impl(geometry, array, scan_dy, heating, loading,
                            workers, true);
}

namespace serial {
SurvivalMap simulate_scan(const DeviceGeometry& geometry,
                          const TweezerArray& array,
                          std::span<const double> scan_dy,
                          const HeatingInputs* heating,
                          const LoadingModel& loading) {
  return simulate_scan_impl(geometry, array, scan_dy, heating, loading, 1,
                            false);
}
}  // namespace serial

TiltEstimate tilt_estimate(const SurvivalMap& map, const TweezerArray& array) {
  if (map.rows < 2) {
    throw InsufficientSignalError("tilt_estimate: need at least 2 array rows");
  }
  if (map.rows != array.rows || map.cols != array.cols) {
    throw InvalidParameterError("tilt_estimate: map shape does not match array");
  }

  TiltEstimate est;
  est.row_positions.resize(map.rows);
  est.row_centers.resize(map.rows);
  std::vector<double> center_var(map.rows, 0.0);

  for (int r = 0; r < map.rows; ++r) {
    // baseline survival of the row (top decile): loading and transport
    // losses are uniform over the scan and would otherwise pull every
    // centroid toward the scan-range center
    std::vector<double> svals;
    svals.reserve(static_cast<std::size_t>(map.cols) * map.coordinates.size());
    double min_survival = 1.0;
    for (int c = 0; c < map.cols; ++c) {
      const int site = r * map.cols + c;
      for (std::size_t j = 0; j < map.coordinates.size(); ++j) {
        const double s = map.survival[map.index(site, j)];
        svals.push_back(s);
        min_survival = std::min(min_survival, s);
      }
    }
    std::sort(svals.begin(), svals.end());
    const double baseline = svals[static_cast<std::size_t>(0.9 * (svals.size() - 1))];

    double weight = 0.0, first = 0.0;
    for (int c = 0; c < map.cols; ++c) {
      const int site = r * map.cols + c;
      const double y0 = array.site_position(r, c)[1];
      for (std::size_t j = 0; j < map.coordinates.size(); ++j) {
        const double s = map.survival[map.index(site, j)];
        const double loss = std::max(0.0, baseline - s);
        weight += loss;
        first += loss * (y0 + map.coordinates[j]);
      }
    }
    // the loss dip must reach half the baseline (the plain < 0.5 criterion,
    // scaled for imperfect loading/transport)
    if (min_survival >= 0.5 * baseline || weight <= 0.0) {
      throw InsufficientSignalError(
          "tilt_estimate: loss feature absent in row " + std::to_string(r) +
          " (min survival " + std::to_string(min_survival) + ", baseline " +
          std::to_string(baseline) + ")");
    }
    const double center = first / weight;
    // binomial shot noise propagated through the centroid (delta method)
    double var = 0.0;
    for (int c = 0; c < map.cols; ++c) {
      const int site = r * map.cols + c;
      const double y0 = array.site_position(r, c)[1];
      for (std::size_t j = 0; j < map.coordinates.size(); ++j) {
        const double s = map.survival[map.index(site, j)];
        const long n = map.shot_counts[map.index(site, j)];
        if (n <= 0 || s >= baseline) continue;
        const double vs = s * (1.0 - s) / static_cast<double>(n);
        const double lever = (y0 + map.coordinates[j]) - center;
        var += lever * lever * vs;
      }
    }
    center_var[r] = var / (weight * weight);
    est.row_positions[r] = array.site_position(r, 0)[0];
    est.row_centers[r] = center;
  }

  // least-squares line: center = a + b * x
  const int n = map.rows;
  double sx = 0.0, sy = 0.0;
  for (int r = 0; r < n; ++r) {
    sx += est.row_positions[r];
    sy += est.row_centers[r];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (int r = 0; r < n; ++r) {
    const double dx = est.row_positions[r] - mx;
    sxx += dx * dx;
    sxy += dx * (est.row_centers[r] - my);
  }
  if (!(sxx > 0.0)) {
    throw InvalidParameterError("tilt_estimate: array rows share one position");
  }
  const double slope = sxy / sxx;

  // slope variance: propagated shot noise, and residual scatter when there
  // are enough rows; report the larger
  double var_noise = 0.0;
  for (int r = 0; r < n; ++r) {
    const double h = (est.row_positions[r] - mx) / sxx;
    var_noise += h * h * center_var[r];
  }
  double var_resid = 0.0;
  if (n >= 3) {
    double sse = 0.0;
    for (int r = 0; r < n; ++r) {
      const double fit = my + slope * (est.row_positions[r] - mx);
      const double d = est.row_centers[r] - fit;
      sse += d * d;
    }
    var_resid = sse / (n - 2) / sxx;
  }
  const double var_slope = std::max(var_noise, var_resid);

  est.tilt = std::atan(slope);
  // d(atan)/dslope = 1/(1+slope^2)
  est.std_error = std::sqrt(var_slope) / (1.0 + slope * slope);
  return est;
}

}  // namespace atomscope
