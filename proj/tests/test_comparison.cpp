#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "magspec/comparison.hpp"

using namespace magspec;

namespace {

Eigen::MatrixXd dense(const Tridiag& T) {
  const auto n = static_cast<Eigen::Index>(T.size());
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    M(i, i) = T.diag[static_cast<std::size_t>(i)];
    if (i + 1 < n) M(i, i + 1) = M(i + 1, i) = T.offdiag[static_cast<std::size_t>(i)];
  }
  return M;
}

// Even bound state of -u'' + (omega^2 + lambda) u on |x| < 1 at energy zero: q tan q = omega.
double square_well_oracle(double omega) {
  double lo = 1e-12, hi = std::numbers::pi / 2 - 1e-12;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mid * std::tan(mid) < omega ? lo : hi) = mid;
  }
  const double q = 0.5 * (lo + hi);
  return -(omega * omega + q * q);
}

}  // namespace

TEST_CASE("closed-form comparison values") {
  CHECK(exact_inf_L(1.0, -1.0) == 0.75);
  CHECK(exact_inf_L(1.0, 0.0) == 1.0);
  CHECK(exact_inf_L(1.0, -2.0) == 0.0);
  CHECK(delta_eigenfunction(-1.0, 0.0) == doctest::Approx(std::sqrt(0.5)));
  CHECK(delta_eigenfunction(-1.0, 80.0) < 1e-17);
  double norm = 0.0;
  const double h = 1e-3;
  for (int i = -60000; i <= 60000; ++i) norm += h * std::pow(delta_eigenfunction(-1.0, i * h), 2);
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("delta well ground energy converges with order at least one") {
  const double exact = 0.75;
  double previous = 0.0;
  for (std::size_t n : {1001u, 2001u, 4001u}) {
    const Grid1D g = Grid1D::make(20.0, n);
    const double e = inf_spectrum_1d(assemble_L(1.0, -1.0, g));
    const double err = std::abs(e - exact);
    if (n == 4001) CHECK(err < 1e-3);
    if (previous > 0.0) CHECK(std::log2(previous / err) >= 1.0);
    previous = err;
  }
}

TEST_CASE("lattice matched point interaction reproduces the bound energy") {
  for (double h : {0.1, 0.05, 0.01}) {
    const Grid1D g = Grid1D::with_spacing(40.0, h);
    const double e = tridiag_eigenvalue(
        assemble_L(1.0, -1.0, g, std::nullopt, true, DeltaScheme::LatticeMatched), 0);
    CHECK(e == doctest::Approx(0.75).epsilon(1e-10));
  }
  CHECK(delta_diagonal(-1.0, 0.05, DeltaScheme::NodeBump) == doctest::Approx(-20.0));
  CHECK(delta_diagonal(3.0, 0.05, DeltaScheme::LatticeMatched) ==
        doctest::Approx(-delta_diagonal(-3.0, 0.05, DeltaScheme::LatticeMatched)));
}

TEST_CASE("free operator matches box modes and the plain Laplacian") {
  const Grid1D g = Grid1D::make(20.0, 2001);
  const Tridiag T = assemble_L(1.0, 0.0, g);
  const double h = g.h, L = 40.0 + 2.0 * h;  // Dirichlet ghosts sit one step outside
  const double exact_discrete = 1.0 + 4.0 / (h * h) * std::pow(std::sin(std::numbers::pi * h / (2.0 * L)), 2);
  CHECK(inf_spectrum_1d(T) == doctest::Approx(exact_discrete).epsilon(1e-12));
  CHECK(inf_spectrum_1d(T) == doctest::Approx(1.0 + std::pow(std::numbers::pi, 2) / (4.0 * 400.0)).epsilon(1e-4));
  for (std::size_t i = 0; i < T.size(); ++i) CHECK(T.diag[i] == 2.0 / (h * h) + 1.0);

  CHECK(inf_spectrum_1d(assemble_L(1.0, -2.0, Grid1D::make(20.0, 4001))) == doctest::Approx(0.0).epsilon(0.02).scale(1.0));
}

TEST_CASE("tridiagonal eigenvalues agree with a dense solve") {
  const auto V = PotentialSpec::square_well(1.0);
  const Grid1D g = Grid1D::make(8.0, 801);
  for (const Tridiag& T : {assemble_L(1.0, -1.0, g, V), assemble_L(1.0, -1.0, g),
                           assemble_L(0.5, -0.3, Grid1D::make(8.0, 801, BoundaryCondition::Neumann))}) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense(T), Eigen::EigenvaluesOnly);
    const auto ours = lowest_eigenvalues_1d(T, 8);
    for (std::size_t i = 0; i < 8; ++i)
      CHECK(std::abs(ours[i] - es.eigenvalues()(static_cast<Eigen::Index>(i))) < 1e-10);
    const auto p = eigenpair_1d(T, 0);
    CHECK(p.residual < 1e-8);
  }
}

TEST_CASE("ground energy is nonincreasing in the coupling strength") {
  const auto V = PotentialSpec::square_well(1.0);
  const Grid1D g = Grid1D::make(20.0, 4001);
  double prev = 1e300;
  for (double lambda : {0.0, -0.5, -1.0, -1.5, -2.0}) {
    const double e = tridiag_eigenvalue(assemble_L(1.0, lambda, g, V), 0);
    CHECK(e <= prev);
    prev = e;
  }
}

TEST_CASE("critical coupling of the square well matches the transcendental oracle") {
  const auto V = PotentialSpec::square_well(1.0);
  const double oracle = square_well_oracle(1.0);
  CHECK(oracle == doctest::Approx(-1.7401).epsilon(1e-4));
  const double lambda_star = critical_lambda(1.0, V);
  CHECK(std::abs(lambda_star - oracle) < 1e-4);

  const double l2 = critical_lambda(2.0, V);
  CHECK(std::abs(l2 - square_well_oracle(2.0)) < 1e-3);
}

TEST_CASE("narrow wells approach the point interaction") {
  double prev_err = 1e300;
  for (double eta : {0.2, 0.1, 0.05}) {
    const auto V = PotentialSpec::square_well(eta / 2.0, 1.0 / eta, 1e-4);
    const double ls = critical_lambda(1.0, V);
    const double err = std::abs(ls + 2.0);
    CHECK(err < prev_err);
    prev_err = err;
  }
  CHECK(prev_err < 0.04);
}

TEST_CASE("critical coupling brackets fail for an impossible well") {
  const auto V = PotentialSpec::from_function(1.0, 5, [](double) { return 1e-12; });
  CHECK_THROWS_AS(critical_lambda(1.0, V), Error);
}

TEST_CASE("oscillator ground state") {
  const auto g = oscillator_ground(1.0, 1.0);
  CHECK(g.energy == doctest::Approx(std::sqrt(2.0)));
  CHECK(oscillator_ground(1.0, 0.0).energy == 1.0);
  const Grid1D grid = Grid1D::make(10.0, 2001);
  Tridiag T = assemble_L(0.0, 0.0, grid, std::nullopt, false);
  for (std::size_t i = 0; i < T.size(); ++i) T.diag[i] += 2.0 * grid.x(i) * grid.x(i);
  CHECK(std::abs(inf_spectrum_1d(T) - g.energy) < 1e-4);
  double norm = 0.0;
  for (std::size_t i = 0; i < grid.n; ++i) norm += grid.h * g(grid.x(i)) * g(grid.x(i));
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("numeric ground state is normalized") {
  const Grid1D grid = Grid1D::make(20.0, 4001);
  const auto g = numeric_ground(1.0, -1.0, grid, PotentialSpec::square_well(1.0));
  double norm = 0.0;
  for (double v : g.samples) norm += grid.h * v * v;
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(g(0.0) > 0.0);
}

TEST_CASE("L_eps coupling rescaling") {
  const auto V = PotentialSpec::square_well(1.0);
  const Grid1D g = Grid1D::make(20.0, 4001);
  const double base = tridiag_eigenvalue(assemble_L(1.0, -1.0, g, V), 0);
  CHECK(inf_L_eps(1.0, -1.0, 1e-9, V, g) == doctest::Approx(base).epsilon(1e-8));
  const double e1 = inf_L_eps(1.0, -1.0, 0.1, V, g);
  const double e2 = inf_L_eps(1.0, -1.0, 0.2, V, g);
  const double e4 = inf_L_eps(1.0, -1.0, 0.4, V, g);
  CHECK(e1 >= e2);
  CHECK(e2 >= e4);
  const double ls = critical_lambda(1.0, V, {g, 1e-10});
  CHECK(inf_L_eps(1.0, ls / 2.0, 0.5, V, g) == tridiag_eigenvalue(assemble_L(1.0, ls, g, V), 0));
  CHECK_THROWS_AS(inf_L_eps(1.0, -1.0, 1.0, V, g), Error);
}

TEST_CASE("coarse grids are rejected for the point interaction") {
  CHECK_THROWS_AS(assemble_L(1.0, -5.0, Grid1D::make(20.0, 201)), Error);
}
