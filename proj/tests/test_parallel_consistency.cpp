#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "atomscope/franck_condon.hpp"
#include "atomscope/heating.hpp"
#include "atomscope/inference.hpp"
#include "atomscope/scan.hpp"
#include "atomscope/units.hpp"

// The OpenMP kernels and their serial references must produce identical
// bits: per-item work is deterministic and nothing reduces across threads.

using namespace atomscope;

namespace {
const PhysicalConstants kConstants = PhysicalConstants::cesium_d2();
}

TEST_CASE("franck_condon_matrix: serial == parallel, any worker count") {
  for (double eta : {0.1, 0.262, 0.7}) {
    const auto ref = serial::franck_condon_matrix(eta, 150);
    for (int workers : {1, 2, 4, 8}) {
      const auto par = franck_condon_matrix(eta, 150, workers);
      CHECK(par.probs == ref.probs);
    }
  }
}

TEST_CASE("matrix multiply: serial == parallel") {
  const auto fc = franck_condon_matrix(0.262, 96);
  std::vector<double> ref, par;
  detail::matrix_multiply_serial(fc.probs, fc.probs, ref, 96);
  for (int workers : {1, 3, 8}) {
    detail::matrix_multiply(fc.probs, fc.probs, par, 96, workers);
    CHECK(par == ref);
  }
}

TEST_CASE("survival_vs_position: serial == parallel") {
  AnalyticEvanescentModel model;
  model.power = 400e-12;
  model.decay_length = 743e-9;
  model.r_min = 90e-9;
  const FieldModel field = model;
  const auto sat = SaturationContext::from_constants(kConstants);
  TrapSpec trap;
  trap.n_trunc = 80;

  std::vector<SitePosition> sites;
  for (int i = 0; i < 40; ++i) sites.push_back({0.15e-6 + i * 0.12e-6, 0.0});

  const auto ref = serial::survival_vs_position(sites, field, sat, trap,
                                                kConstants, 40e-6, 6e-3);
  for (int workers : {1, 4, 8}) {
    const auto par = survival_vs_position(sites, field, sat, trap, kConstants,
                                          40e-6, 6e-3, workers);
    REQUIRE(par.size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) {
      CHECK(par[i].survival == ref[i].survival);
      CHECK(par[i].intensity == ref[i].intensity);
      CHECK(par[i].rate == ref[i].rate);
    }
  }
}

TEST_CASE("simulate_scan: serial == parallel") {
  DeviceGeometry geometry;
  geometry.elements.push_back({"waveguide", 0.0, 0.0, 200e-6, 90e-9, 200e-9});
  geometry.tilt = units::deg_to_rad(0.5);
  TweezerArray array;
  array.rows = 4;
  array.cols = 2;
  LoadingModel loading;
  loading.shots = 200;
  loading.seed = 31337;
  std::vector<double> coords;
  for (int i = 0; i <= 40; ++i) coords.push_back(-2e-6 + i * 0.1e-6);

  const auto ref = serial::simulate_scan(geometry, array, coords, nullptr, loading);
  for (int workers : {1, 4, 8}) {
    const auto par = simulate_scan(geometry, array, coords, nullptr, loading, workers);
    CHECK(par.survival == ref.survival);
    CHECK(par.shot_counts == ref.shot_counts);
  }
}

TEST_CASE("release_recapture: serial == parallel") {
  const TrapSpec trap;
  std::vector<double> times;
  for (int i = 0; i <= 12; ++i) times.push_back(i * 8e-6);
  const auto ref = serial::release_recapture_simulate(40e-6, trap, kConstants,
                                                      times, 5000, 77);
  for (int workers : {1, 4, 8}) {
    const auto par = release_recapture_simulate(40e-6, trap, kConstants, times,
                                                5000, 77, 0.0, workers);
    CHECK(par.survival == ref.survival);
  }
}
