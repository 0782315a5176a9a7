#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "magspec/model.hpp"

using namespace magspec;

namespace {
ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidParameter;
}
}  // namespace

TEST_CASE("validate_params accepts the reference point and rejects invalid couplings") {
  ModelParams p{1.0, 1.0, -1.0, ModelKind::DeltaLine, std::nullopt};
  CHECK(validate_params(p).lambda == -1.0);
  CHECK(code_of([] { validate_params({0.0, 1.0, -1.0, ModelKind::DeltaLine, std::nullopt}); }) ==
        ErrorCode::RejectsNonpositiveOmega);
  CHECK(code_of([] { validate_params({1.0, 1.0, 0.5, ModelKind::DeltaLine, std::nullopt}); }) ==
        ErrorCode::RejectsPositiveLambda);
  CHECK(code_of([] { validate_params({1.0, 1.0, -1.0, ModelKind::RegularV, std::nullopt}); }) ==
        ErrorCode::MissingPotential);
  ModelParams zero_field{1.0, 0.0, 0.0, ModelKind::DeltaLine, std::nullopt};
  CHECK_NOTHROW(validate_params(zero_field));
}

TEST_CASE("potential vanishes outside its support and interpolates") {
  const auto V = PotentialSpec::from_function(2.0, 401, [](double s) { return 4.0 - s * s; });
  CHECK(V(2.0) == 0.0);
  CHECK(V(-2.5) == 0.0);
  CHECK(V(100.0) == 0.0);
  CHECK(V(0.0) == doctest::Approx(4.0));
  CHECK(V(1.0) == doctest::Approx(3.0).epsilon(1e-4));
  CHECK(V.integral() == doctest::Approx(32.0 / 3.0).epsilon(1e-4));
  CHECK(V.is_symmetric());

  const auto C = PotentialSpec::from_function(2.0, 401, [](double s) { return 4.0 - s * s; },
                                              Interpolation::CubicClamped);
  CHECK(C(1.003) == doctest::Approx(4.0 - 1.003 * 1.003).epsilon(1e-6));
  CHECK(C(3.0) == 0.0);
}

TEST_CASE("square well has half height on its edges") {
  const auto W = PotentialSpec::square_well(1.0, 1.0, 1e-3);
  CHECK(W(0.0) == 1.0);
  CHECK(W(0.9994) == doctest::Approx(1.0));
  CHECK(W(1.0) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(W(-1.0) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(W(1.0006) == 0.0);
  CHECK(W.integral() == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(W.sup_norm() == 1.0);
  const auto D = W.dilated(2.0);
  CHECK(D(0.5) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(D.integral() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("potential validation") {
  CHECK(code_of([] { PotentialSpec(1.0, {0.0, -1.0, 0.0}); }) == ErrorCode::InvalidPotential);
  CHECK(code_of([] { PotentialSpec(1.0, {0.0, 1.0, 0.5}); }) == ErrorCode::InvalidPotential);
  CHECK(code_of([] { PotentialSpec(0.0, {0.0, 1.0, 0.0}); }) == ErrorCode::InvalidPotential);
}

TEST_CASE("potential file round trip") {
  const auto path = std::filesystem::temp_directory_path() / "magspec_potential_test.txt";
  const auto V = PotentialSpec::from_function(1.5, 31, [](double s) { return std::cos(s); });
  write_potential_file(path, V);
  const auto R = read_potential_file(path);
  CHECK(R.s0() == V.s0());
  REQUIRE(R.samples().size() == V.samples().size());
  for (std::size_t i = 0; i < V.samples().size(); ++i) CHECK(R.samples()[i] == V.samples()[i]);

  {
    std::ofstream out(path);
    out << "# potential s0=1\n-1 0\n0 1\n-0.5 0\n";
  }
  CHECK(code_of([&] { read_potential_file(path); }) == ErrorCode::InvalidPotential);
  {
    std::ofstream out(path);
    out << "-1 0\n0 1\n1 0\n";
  }
  CHECK(code_of([&] { read_potential_file(path); }) == ErrorCode::InvalidPotential);
  std::filesystem::remove(path);
}

TEST_CASE("grids are node centered") {
  const auto g = Grid2D::make(12.0, 6.0, 481, 241);
  CHECK(g.x(240) == 0.0);
  CHECK(g.y(120) == 0.0);
  CHECK(g.hx == doctest::Approx(0.05));
  CHECK(g.x_zero_node().value() == 240);
  CHECK(g.x_max() == doctest::Approx(12.0));

  CHECK(code_of([] { Grid2D::make(1.0, 1.0, 4, 5); }) == ErrorCode::InvalidGrid);
  CHECK(code_of([] { Grid1D::make(-1.0, 5); }) == ErrorCode::InvalidGrid);

  const auto shifted = Grid2D::make(1.0, 1.0, 5, 5, BoundaryCondition::Dirichlet, 0.3, 0.0);
  CHECK(shifted.spans_x_zero());
  CHECK_FALSE(shifted.x_zero_node().has_value());
  const auto away = Grid2D::make(1.0, 1.0, 5, 5, BoundaryCondition::Dirichlet, 5.0, 0.0);
  CHECK_FALSE(away.spans_x_zero());

  const auto s = Grid1D::with_spacing(20.0, 0.01);
  CHECK(s.n % 2 == 1);
  CHECK(s.h <= 0.01);
  CHECK(s.x(s.middle()) == 0.0);
}

TEST_CASE("self-adjointness predicate") {
  const auto V = PotentialSpec::square_well(1.0);
  ModelParams p{1.0, 1.0, -1.0, ModelKind::RegularV, V};
  auto r = esa_condition_check(p, V);
  CHECK(r.holds);
  CHECK(r.K == 0.5);
  CHECK(r.k == doctest::Approx(1.0));
  CHECK(r.harmonic_partial_sum > 4.0);

  p.lambda = 0.0;
  r = esa_condition_check(p, V);
  CHECK(r.holds);
  CHECK(r.k == 0.0);

  const auto V2 = PotentialSpec::square_well(1.0, 2.0);
  p.lambda = -3.0;
  r = esa_condition_check(p, V2);
  CHECK(r.holds);
  CHECK(r.k == doctest::Approx(6.0));
}
