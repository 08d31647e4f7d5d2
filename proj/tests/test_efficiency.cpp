#include <cmath>

#include "doctest.h"
#include "qedet/efficiency.hpp"

using namespace qedet;

namespace {

// Literal bounce-by-bounce sum: absorbed on encounter n after n - 1 reflections.
double trap_series(double eta, int n_detectors) {
  double total = 0.0;
  for (int n = 1; n <= 2 * n_detectors - 1; ++n) total += eta * std::pow(1.0 - eta, n - 1);
  return total;
}

}  // namespace

TEST_CASE("trap_absorption single bounce is the identity") {
  for (double x : {0.0, 0.13, 0.5, 0.69, 1.0}) CHECK(trap_absorption(x, 1) == x);
}

TEST_CASE("trap_absorption perfect absorber") { CHECK(trap_absorption(1.0, 3) == 1.0); }

TEST_CASE("trap_absorption five bounces") {
  CHECK(trap_absorption(0.69, 3) == doctest::Approx(0.9971370849).epsilon(1e-10));
  CHECK(trap_absorption(0.69, 3) == doctest::Approx(trap_series(0.69, 3)).epsilon(1e-14));
}

TEST_CASE("trap_absorption closed form matches series on the grid") {
  for (int i = 0; i <= 10; ++i) {
    const double eta = i / 10.0;
    for (int n = 1; n <= 10; ++n) {
      CHECK(std::abs(trap_absorption(eta, n) - trap_series(eta, n)) <= 1e-12);
    }
  }
}

TEST_CASE("trap_absorption is monotone in both arguments") {
  for (int i = 0; i <= 20; ++i) {
    const double eta = i / 20.0;
    for (int n = 1; n < 12; ++n) {
      CHECK(trap_absorption(eta, n + 1) >= trap_absorption(eta, n));
      if (i < 20) CHECK(trap_absorption(eta + 0.05, n) >= trap_absorption(eta, n));
      CHECK(trap_absorption(eta, n) >= eta);
      CHECK(trap_absorption(eta, n) <= 1.0);
    }
  }
}

TEST_CASE("linear geometry counts one encounter per detector") {
  CHECK(trap_encounters(3, TrapGeometryKind::linear) == 3);
  CHECK(trap_encounters(3, TrapGeometryKind::retro) == 5);
  CHECK(trap_absorption(0.69, 3, TrapGeometryKind::linear) == doctest::Approx(1.0 - std::pow(0.31, 3)));
}

TEST_CASE("trap_absorption domain errors") {
  CHECK_THROWS_AS(trap_absorption(1.2, 1), std::domain_error);
  CHECK_THROWS_AS(trap_absorption(-0.1, 1), std::domain_error);
  CHECK_THROWS_AS(trap_absorption(0.5, 0), std::domain_error);
}

TEST_CASE("total_qe") {
  StageEfficiencies<double> s;
  CHECK(total_qe(s) == 1.0);

  s = {0.999, 0.69, 0.99, 1.0, 3, TrapGeometryKind::retro};
  CHECK(total_qe(s) == doctest::Approx(0.98617854834).epsilon(1e-10));

  for (int k = 0; k < 4; ++k) {
    StageEfficiencies<double> z{0.9, 0.9, 0.9, 0.9, 2, TrapGeometryKind::retro};
    (k == 0 ? z.eta_col : k == 1 ? z.eta_abs : k == 2 ? z.eta_pe : z.eta_mul) = 0.0;
    CHECK(total_qe(z) == 0.0);
  }
}

TEST_CASE("total_qe never exceeds its smallest factor") {
  for (double a : {0.1, 0.5, 0.93}) {
    for (double b : {0.2, 0.69, 1.0}) {
      StageEfficiencies<double> s{a, b, 0.97, 0.8, 2, TrapGeometryKind::retro};
      const double eff = trap_absorption(b, 2);
      CHECK(total_qe(s) <= std::min({a, eff, 0.97, 0.8}) + 1e-15);
    }
  }
}

TEST_CASE("total_qe rejects out-of-range stages") {
  StageEfficiencies<double> s;
  s.eta_pe = 1.01;
  CHECK_THROWS_AS(total_qe(s), std::domain_error);
  s.eta_pe = 1.0;
  s.trap_detectors = 0;
  CHECK_THROWS_AS(total_qe(s), std::domain_error);
}

TEST_CASE("dark_adjusted_qe") {
  RateBudget<double> b;
  b.dark_rate = 25.0;
  b.photon_flux = 1e9;
  CHECK(dark_adjusted_qe(0.75, b).adjusted == doctest::Approx(0.75 - 2.5e-8).epsilon(1e-15));

  b.dark_rate = 2e4;
  b.photon_flux = 1e7;
  CHECK(dark_adjusted_qe(0.94, b).adjusted == doctest::Approx(0.938).epsilon(1e-14));

  b.dark_rate = 0.0;
  CHECK(dark_adjusted_qe(0.42, b).adjusted == 0.42);
}

TEST_CASE("dark_adjusted_qe is signed and never above eta") {
  RateBudget<double> b;
  b.photon_flux = 100.0;
  b.dark_rate = 90.0;
  const auto r = dark_adjusted_qe(0.5, b);
  CHECK(r.adjusted < 0.0);
  for (double d : {1e-3, 1.0, 10.0, 1e3}) {
    b.dark_rate = d;
    CHECK(dark_adjusted_qe(0.5, b).adjusted < 0.5);
  }
}

TEST_CASE("dark_adjusted_qe count-rate reading") {
  RateBudget<double> b{800.0, 100.0, 0.0, 1000.0};
  const auto r = dark_adjusted_qe(0.7, b);
  REQUIRE(r.from_counts);
  CHECK(*r.from_counts == doctest::Approx(0.7));
}

TEST_CASE("dark_adjusted_qe errors") {
  RateBudget<double> b;
  b.dark_rate = 1.0;
  CHECK_THROWS_AS(dark_adjusted_qe(0.5, b), std::domain_error);  // zero flux
  b.photon_flux = 1.0;
  b.dark_rate.reset();
  CHECK_THROWS_AS(dark_adjusted_qe(0.5, b), std::domain_error);  // unknown dark rate
}

TEST_CASE("photon_flux") {
  CHECK(photon_flux(0.0, 800e-9) == 0.0);
  CHECK(photon_flux(1e-12, 800e-9) == doctest::Approx(4.0272932540e6).epsilon(1e-10));
  CHECK(photon_flux(2e-12, 633e-9) == 2.0 * photon_flux(1e-12, 633e-9));
  CHECK_THROWS_AS(photon_flux(1.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(photon_flux(1.0, -1e-9), std::domain_error);
}

TEST_CASE("rate_bracket with detector table values") {
  SUBCASE("APD") {
    RateBudget<double> b{std::nullopt, 25.0, 1e-9, 0.0};
    const auto r = rate_bracket(b, 1e3);
    CHECK(r.feasible);
    CHECK(r.lower == doctest::Approx(2.5e4));
    CHECK(r.upper == doctest::Approx(1e6));
  }
  SUBCASE("VLPC") {
    RateBudget<double> b{std::nullopt, 2e4, 3.33e-9, 0.0};
    const auto r = rate_bracket(b, 1e3);
    CHECK_FALSE(r.feasible);
    CHECK(r.lower == doctest::Approx(2e7));
    CHECK(r.upper == doctest::Approx(3.003e5).epsilon(1e-3));
    CHECK(r.gap_ratio > 1.0);
  }
  SUBCASE("SSPD") {
    RateBudget<double> b{std::nullopt, 0.01, 3.3e-11, 0.0};
    const auto r = rate_bracket(b, 1e3);
    CHECK(r.feasible);
    CHECK(r.lower == doctest::Approx(10.0));
    CHECK(r.upper == doctest::Approx(3.0303e7).epsilon(1e-4));
  }
}

TEST_CASE("rate_bracket nonempty iff margin^2 N_d tau < 1") {
  for (double margin : {1.0, 10.0, 1e3}) {
    for (double dark : {0.0, 1e-2, 1.0, 1e2, 1e4}) {
      for (double tau : {1e-11, 1e-9, 1e-6, 1e-3}) {
        const auto r = rate_bracket(RateBudget<double>{std::nullopt, dark, tau, 0.0}, margin);
        CHECK(r.feasible == (margin * margin * dark * tau < 1.0));
        const double product = margin * margin * dark * tau;
        if (std::abs(product - 1.0) > 1e-9) CHECK(r.feasible == (r.lower < r.upper));
      }
    }
  }
}

TEST_CASE("rate_bracket errors") {
  CHECK_THROWS_AS(rate_bracket(RateBudget<double>{std::nullopt, std::nullopt, 1e-9, 0.0}), std::domain_error);
  CHECK_THROWS_AS(rate_bracket(RateBudget<double>{std::nullopt, 1.0, 0.0, 0.0}), std::domain_error);
  CHECK_THROWS_AS(rate_bracket(RateBudget<double>{std::nullopt, 1.0, 1e-9, 0.0}, 0.5), std::domain_error);
}

TEST_CASE("formulas work with long double") {
  StageEfficiencies<long double> s{0.999L, 0.69L, 0.99L, 1.0L, 3, TrapGeometryKind::retro};
  CHECK(double(total_qe(s)) == doctest::Approx(0.98617854834).epsilon(1e-10));
}
