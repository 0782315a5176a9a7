#include <cmath>

#include "doctest.h"
#include "magspec/fiber.hpp"

using namespace magspec;

namespace {

ModelParams params(double omega, double b, double lambda) {
  ModelParams p;
  p.omega = omega;
  p.b_field = b;
  p.lambda = lambda;
  return p;
}

// Shifted oscillator: a (y - xi B / a^2)^2 completed square, a^2 = omega^2 + B^2.
double band_oracle(double omega, double b, double xi) {
  const double a2 = omega * omega + b * b;
  return std::sqrt(a2) + omega * omega * xi * xi / a2;
}

}  // namespace

TEST_CASE("fiber eigenvalues follow the shifted oscillator") {
  const auto p = params(1.0, 1.0, -1.0);
  const Grid1D g = fiber_grid(10.0, 0.02);
  for (double xi : {0.0, 0.7, -1.5, 3.0}) {
    const double e = tridiag_eigenvalue(fiber_operator(p, xi, 10.0, g), 0);
    CHECK(e == doctest::Approx(band_oracle(1.0, 1.0, xi)).epsilon(2e-4));
  }
  const auto q = params(2.0, 0.5, -1.0);
  const double e = tridiag_eigenvalue(fiber_operator(q, 1.0, 10.0, g), 0);
  CHECK(e == doctest::Approx(band_oracle(2.0, 0.5, 1.0)).epsilon(2e-4));
}

TEST_CASE("zero field fibers decouple") {
  const auto p = params(1.0, 0.0, -1.0);
  const Grid1D g = fiber_grid(10.0, 0.02);
  for (double xi : {0.0, 0.5, 1.0}) {
    const double e = tridiag_eigenvalue(fiber_operator(p, xi, 10.0, g), 0);
    CHECK(e == doctest::Approx(1.0 + xi * xi).epsilon(2e-4));
  }
}

TEST_CASE("band scan minimum sits at xi = 0 on wide strips") {
  const auto p = params(1.0, 1.0, 0.0);
  const BandFunction band = band_scan(p, 12.0, default_xi_range(p, 12.0), 101);
  CHECK(band.xi_samples.size() == 101);
  CHECK(std::abs(band.argmin) < 1e-12);
  CHECK(band.minimum == doctest::Approx(discrete_threshold(p)).epsilon(1e-12));
  CHECK(band.minimum == doctest::Approx(std::sqrt(2.0)).epsilon(1e-3));
  for (double r : band.residuals) CHECK(r < 1e-8);
}

TEST_CASE("Neumann strips lower the band and the deficit decays") {
  const auto p = params(1.0, 1.0, 0.0);
  const double thr = discrete_threshold(p);
  const double narrow = band_scan(p, 1.0, default_xi_range(p, 1.0), 201).minimum;
  const double wide = band_scan(p, 4.0, default_xi_range(p, 4.0), 201).minimum;
  CHECK(narrow < wide);
  CHECK(wide <= thr + 1e-12);
  const double d40 = thr - band_scan(p, 40.0, default_xi_range(p, 40.0), 201).minimum;
  const double d80 = thr - band_scan(p, 80.0, default_xi_range(p, 80.0), 201).minimum;
  CHECK(d40 <= 0.05);
  CHECK(d80 <= d40 / 2 + 1e-9);
}

TEST_CASE("coarse fiber grids are rejected") {
  const auto p = params(4.0, 4.0, 0.0);
  CHECK_THROWS_AS(fiber_operator(p, 0.0, 5.0, fiber_grid(5.0, 0.2)), Error);
}

TEST_CASE("bracketing certificate pieces") {
  const auto c = bracketing_lower_bound_sm(params(1.0, 1.0, -1.0), 2.0, 0.05, 51);
  REQUIRE(c.pieces.size() == 3);
  CHECK(c.pieces[0].name == "outer+");
  CHECK(c.pieces[0].lower_bound == doctest::Approx(3.0));
  CHECK(c.pieces[1].lower_bound == doctest::Approx(4.0));
  double lo = INFINITY;
  for (const auto& piece : c.pieces) lo = std::min(lo, piece.lower_bound);
  CHECK(c.overall_lower_bound == lo);
  CHECK(c.overall_lower_bound > 0.0);

  const auto crit = bracketing_lower_bound_sm(params(1.0, 1.0, -2.0), 2.0, 0.05, 51);
  CHECK(crit.pieces[0].lower_bound == doctest::Approx(0.0));
  CHECK(crit.overall_lower_bound == doctest::Approx(0.0));

  CHECK_THROWS_AS(bracketing_lower_bound_sm(params(1.0, 1.0, -3.0), 2.0), Error);
}

TEST_CASE("central piece is a Neumann oscillator floor") {
  // c = min(omega^2 - lambda^2/4, omega^2) = 0.75: wide strip floor tends to sqrt(0.75)
  const auto c = bracketing_lower_bound_sm(params(1.0, 1.0, -1.0), 10.0, 0.02, 21);
  CHECK(c.pieces[2].lower_bound == doctest::Approx(std::sqrt(0.75)).epsilon(1e-3));
  CHECK(c.central_essential == doctest::Approx(std::sqrt(2.0)).epsilon(1e-3));
}

TEST_CASE("regular growth table has exponent two") {
  const PotentialSpec V = PotentialSpec::square_well(1.0);
  ModelParams p = params(1.0, 1.0, -1.0);
  p.kind = ModelKind::RegularV;
  p.potential = V;
  const GrowthTable t = bracketing_growth_regular(p, V, 0.1, {1.0, 4.0, 16.0, 64.0});
  CHECK(t.inf_l_eps > 0.0);
  CHECK(t.rows.size() == 4);
  CHECK(t.rows[0].bound == doctest::Approx(0.9 * t.inf_l_eps));
  CHECK(t.fitted_exponent == doctest::Approx(2.0).epsilon(1e-9));

  ModelParams strong = p;
  strong.lambda = -3.0;
  CHECK_THROWS_AS(bracketing_growth_regular(strong, V, 0.1, {1.0, 2.0}), Error);
}

TEST_CASE("inverse-n fit") {
  CHECK(fit_inverse_n({10.0, 20.0, 40.0}, {0.3, 0.15, 0.075}) == doctest::Approx(3.0));
}
