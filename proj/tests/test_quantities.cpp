#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "atomscope/errors.hpp"
#include "atomscope/field.hpp"
#include "atomscope/quantities.hpp"
#include "atomscope/rng.hpp"

using namespace atomscope;

TEST_CASE("default constants derive consistently") {
  const auto c = PhysicalConstants::cesium_d2();
  CHECK(c.omega_0 == doctest::Approx(c.derived_omega_0()).epsilon(1e-9));
  CHECK(c.omega_recoil ==
        doctest::Approx(c.derived_omega_recoil()).epsilon(1e-4));
  CHECK(c.sigma_0 == doctest::Approx(3.0 * c.wavelength_d2 * c.wavelength_d2 /
                                     units::two_pi)
                         .epsilon(1e-12));
}

TEST_CASE("default I_sat lands at the standard Cs D2 value") {
  const auto c = PhysicalConstants::cesium_d2();
  const auto sat = SaturationContext::from_constants(c);
  CHECK(sat.i_sat > 10.0);   // W/m^2
  CHECK(sat.i_sat < 12.0);
  // invariant: i_sat = hbar omega_0 gamma / (2 sigma_0)
  CHECK(sat.i_sat == doctest::Approx(c.hbar * c.omega_0 * c.gamma /
                                     (2.0 * c.sigma_0))
                         .epsilon(1e-12));
}

TEST_CASE("lamb_dicke") {
  const auto c = PhysicalConstants::cesium_d2();

  SUBCASE("ratio identity: equal frequencies give eta = 1") {
    PhysicalConstants cc = c;
    TrapSpec trap;
    cc.omega_recoil = trap.omega_trap;
    CHECK(lamb_dicke(cc, trap) == doctest::Approx(1.0).epsilon(1e-15));
  }

  SUBCASE("defaults reproduce the ~0.26 value") {
    const TrapSpec trap;
    const double eta = lamb_dicke(c, trap);
    CHECK(eta == doctest::Approx(std::sqrt(2.0663e3 / 30.1e3)).epsilon(1e-12));
    CHECK(eta == doctest::Approx(0.262).epsilon(0.02));
  }

  SUBCASE("zero recoil gives zero") {
    PhysicalConstants cc = c;
    cc.omega_recoil = 0.0;
    CHECK(lamb_dicke(cc, TrapSpec{}) == 0.0);
  }

  SUBCASE("non-positive trap frequency rejected") {
    TrapSpec trap;
    trap.omega_trap = 0.0;
    CHECK_THROWS_AS((void)lamb_dicke(c, trap), InvalidParameterError);
  }

  SUBCASE("scale invariance") {
    rng::Substream s(42);
    for (int i = 0; i < 200; ++i) {
      PhysicalConstants cc = c;
      TrapSpec trap;
      cc.omega_recoil = 1e3 * (0.1 + s.uniform(3 * i));
      trap.omega_trap = 1e5 * (0.1 + s.uniform(3 * i + 1));
      const double eta = lamb_dicke(cc, trap);
      const double scale = 1e-3 + 1e4 * s.uniform(3 * i + 2);
      cc.omega_recoil *= scale;
      trap.omega_trap *= scale;
      CHECK(lamb_dicke(cc, trap) == doctest::Approx(eta).epsilon(1e-12));
    }
  }
}

TEST_CASE("bound_state_count") {
  const auto c = PhysicalConstants::cesium_d2();

  SUBCASE("single quantum") {
    const double w = units::two_pi * 30.1e3;
    CHECK(bound_state_count(c.hbar * w, w, c) == 1);
  }

  SUBCASE("default trap holds 235 states") {
    const double depth = c.k_boltzmann * 340e-6;
    const int n = bound_state_count(depth, units::two_pi * 30.1e3, c);
    CHECK(n == 235);
    CHECK(n >= 230);
    CHECK(n <= 245);
  }

  SUBCASE("below one quantum") {
    const double w = units::two_pi * 30.1e3;
    CHECK(bound_state_count(0.5 * c.hbar * w, w, c) == 0);
  }

  SUBCASE("invalid inputs rejected") {
    CHECK_THROWS_AS((void)bound_state_count(0.0, 1.0, c), InvalidParameterError);
    CHECK_THROWS_AS((void)bound_state_count(1.0, -1.0, c), InvalidParameterError);
  }

  SUBCASE("monotone in depth, antitone in frequency") {
    rng::Substream s(7);
    for (int i = 0; i < 200; ++i) {
      const double d1 = 1e-28 * (1.0 + 1e3 * s.uniform(4 * i));
      const double d2 = d1 * (1.0 + s.uniform(4 * i + 1));
      const double w1 = 1e4 * (1.0 + 10.0 * s.uniform(4 * i + 2));
      const double w2 = w1 * (1.0 + s.uniform(4 * i + 3));
      CHECK(bound_state_count(d2, w1, c) >= bound_state_count(d1, w1, c));
      CHECK(bound_state_count(d1, w2, c) <= bound_state_count(d1, w1, c));
    }
  }
}

TEST_CASE("trap validation") {
  const auto c = PhysicalConstants::cesium_d2();
  TrapSpec trap;
  trap.validate(c);  // defaults are consistent (130 <= 235)

  trap.n_trunc = 236;
  CHECK_THROWS_AS(trap.validate(c), InvalidParameterError);
  trap.n_trunc = 1;
  CHECK_THROWS_AS(trap.validate(c), InvalidParameterError);
  trap.n_trunc = 130;
  trap.waist = -1.0;
  CHECK_THROWS_AS(trap.validate(c), InvalidParameterError);
}
