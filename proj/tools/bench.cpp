#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "atomscope/franck_condon.hpp"
#include "atomscope/heating.hpp"
#include "atomscope/inference.hpp"
#include "atomscope/parallel.hpp"
#include "atomscope/scan.hpp"

// Timings of the OpenMP kernels against their serial references. The two
// paths produce identical results; this target only reports speed.

namespace {

using clock_type = std::chrono::steady_clock;

double time_ms(const std::function<void()>& fn) {
  const auto t0 = clock_type::now();
  fn();
  const auto t1 = clock_type::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

void report(const char* name, double serial_ms, double parallel_ms) {
  std::printf("%-28s serial %9.2f ms   openmp %9.2f ms   speedup %5.2fx\n",
              name, serial_ms, parallel_ms, serial_ms / parallel_ms);
}

}  // namespace

int main(int argc, char** argv) {
  int workers = 0;
  int fc_size = 400;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--workers" && i + 1 < argc) workers = std::atoi(argv[++i]);
    if (arg == "--fc-size" && i + 1 < argc) fc_size = std::atoi(argv[++i]);
  }
  std::printf("workers: %d (0 = runtime default)\n", workers);

  using namespace atomscope;
  const double eta = 0.262;

  // Franck-Condon build
  FranckCondonMatrix fc_serial, fc_par;
  const double t_fc_s =
      time_ms([&] { fc_serial = serial::franck_condon_matrix(eta, fc_size); });
  const double t_fc_p =
      time_ms([&] { fc_par = franck_condon_matrix(eta, fc_size, workers); });
  report("franck_condon_matrix", t_fc_s, t_fc_p);

  // matrix power (130-state heating ladder)
  const auto fc130 = franck_condon_matrix(eta, 130, workers);
  MotionalState state;
  state.pop.assign(130, 1.0 / 130.0);
  const double t_pow_s = time_ms([&] {
    (void)apply_events(state, fc130, 100000,
                       ApplyMethod::kBinaryExponentiation, 1);
  });
  const double t_pow_p = time_ms([&] {
    (void)apply_events(state, fc130, 100000,
                       ApplyMethod::kBinaryExponentiation, workers);
  });
  report("apply_events (k = 1e5)", t_pow_s, t_pow_p);

  // Monte Carlo scan
  DeviceGeometry geom;
  geom.elements.push_back({"waveguide", 0.0, 0.0, 100e-6, 90e-9, 200e-9});
  TweezerArray array;
  array.rows = 8;
  array.cols = 1;
  LoadingModel loading;
  loading.fill_probability = 1.0;
  loading.transport_survival = 1.0;
  loading.shots = 2000;
  loading.seed = 7;
  std::vector<double> coords;
  for (int i = 0; i <= 80; ++i) coords.push_back(-4e-6 + i * 0.1e-6);
  SurvivalMap m1, m2;
  const double t_scan_s = time_ms(
      [&] { m1 = serial::simulate_scan(geom, array, coords, nullptr, loading); });
  const double t_scan_p = time_ms(
      [&] { m2 = simulate_scan(geom, array, coords, nullptr, loading, workers); });
  report("simulate_scan", t_scan_s, t_scan_p);

  // release-recapture sampling
  const auto constants = PhysicalConstants::cesium_d2();
  const TrapSpec trap;
  std::vector<double> times;
  for (int i = 0; i <= 10; ++i) times.push_back(i * 10e-6);
  ReleaseRecaptureCurve c1, c2;
  const double t_rr_s = time_ms([&] {
    c1 = serial::release_recapture_simulate(40e-6, trap, constants, times,
                                            200000, 11);
  });
  const double t_rr_p = time_ms([&] {
    c2 = release_recapture_simulate(40e-6, trap, constants, times, 200000, 11,
                                    0.0, workers);
  });
  report("release_recapture", t_rr_s, t_rr_p);

  // consistency spot checks
  bool same = fc_serial.probs == fc_par.probs && m1.survival == m2.survival &&
              c1.survival == c2.survival;
  std::printf("parallel/serial results identical: %s\n", same ? "yes" : "NO");
  return same ? 0 : 1;
}
