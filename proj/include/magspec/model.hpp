#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "magspec/errors.hpp"

namespace magspec {

enum class ModelKind { DeltaLine, RegularV };
enum class BoundaryCondition { Dirichlet, Neumann };
enum class Interpolation { Linear, CubicClamped };

std::string_view to_string(ModelKind kind);
std::string_view to_string(BoundaryCondition bc);
std::string_view to_string(Interpolation interp);

/// Nonnegative potential V tabulated on a uniform grid over [-s0, s0].
/// Evaluates to exactly zero outside the support.
class PotentialSpec {
 public:
  PotentialSpec(double s0, std::vector<double> samples,
                Interpolation interpolation = Interpolation::Linear);

  /// Tabulate f on n uniform samples; the end samples are forced to zero.
  static PotentialSpec from_function(double s0, std::size_t n, const std::function<double(double)>& f,
                                     Interpolation interpolation = Interpolation::Linear);

  /// Indicator-like well height * 1_{[-half_width, half_width]}, with linear ramps of
  /// width `ramp` centered on the edges (so V(+-half_width) = height / 2).
  static PotentialSpec square_well(double half_width, double height = 1.0, double ramp = 1e-3);

  double operator()(double s) const;

  double s0() const { return s0_; }
  double spacing() const { return ds_; }
  const std::vector<double>& samples() const { return samples_; }
  Interpolation interpolation() const { return interpolation_; }

  double sup_norm() const;
  /// Integral of the interpolant over its support.
  double integral() const;
  bool is_symmetric(double tol = 1e-12) const;
  bool is_zero() const;

  /// The potential s -> V(factor * s); support shrinks to s0 / factor.
  PotentialSpec dilated(double factor) const;

 private:
  double s0_;
  double ds_;
  std::vector<double> samples_;
  Interpolation interpolation_;
  std::vector<double> second_derivatives_;  // spline moments, CubicClamped only
};

/// Reads the two-column `s value` format with a `# potential s0=<float>` header.
PotentialSpec read_potential_file(const std::filesystem::path& path,
                                  Interpolation interpolation = Interpolation::Linear);
void write_potential_file(const std::filesystem::path& path, const PotentialSpec& potential);

struct ModelParams {
  double omega = 1.0;
  double b_field = 1.0;
  double lambda = -1.0;
  ModelKind kind = ModelKind::DeltaLine;
  std::optional<PotentialSpec> potential;

  double transverse_frequency() const;  // sqrt(omega^2 + B^2)
};

ModelParams validate_params(const ModelParams& p);

/// Uniform node-centered 1D grid with an odd node count. Node (n-1)/2 sits at `center`.
struct Grid1D {
  double l = 1.0;
  std::size_t n = 3;
  double h = 1.0;
  BoundaryCondition bc = BoundaryCondition::Dirichlet;
  double center = 0.0;

  static Grid1D make(double l, std::size_t n, BoundaryCondition bc = BoundaryCondition::Dirichlet,
                     double center = 0.0);
  /// Smallest odd node count whose spacing does not exceed h_max.
  static Grid1D with_spacing(double l, double h_max,
                             BoundaryCondition bc = BoundaryCondition::Dirichlet, double center = 0.0);

  std::size_t middle() const { return (n - 1) / 2; }
  double x(std::size_t i) const {
    return center + (static_cast<double>(i) - static_cast<double>(middle())) * h;
  }
  std::vector<double> nodes() const;
};

struct Grid2D {
  double lx = 1.0, ly = 1.0;
  std::size_t nx = 3, ny = 3;
  double hx = 1.0, hy = 1.0;
  BoundaryCondition bc = BoundaryCondition::Dirichlet;
  double x_center = 0.0, y_center = 0.0;

  static Grid2D make(double lx, double ly, std::size_t nx, std::size_t ny,
                     BoundaryCondition bc = BoundaryCondition::Dirichlet, double x_center = 0.0,
                     double y_center = 0.0);
  static Grid2D with_spacing(double lx, double ly, double hx_max, double hy_max,
                             BoundaryCondition bc = BoundaryCondition::Dirichlet,
                             double x_center = 0.0, double y_center = 0.0);

  std::size_t size() const { return nx * ny; }
  std::size_t index(std::size_t i, std::size_t j) const { return j * nx + i; }
  double x(std::size_t i) const {
    return x_center + (static_cast<double>(i) - static_cast<double>((nx - 1) / 2)) * hx;
  }
  double y(std::size_t j) const {
    return y_center + (static_cast<double>(j) - static_cast<double>((ny - 1) / 2)) * hy;
  }
  double x_min() const { return x(0); }
  double x_max() const { return x(nx - 1); }
  double y_min() const { return y(0); }
  double y_max() const { return y(ny - 1); }

  /// Column index of the node x = 0, if the domain contains one.
  std::optional<std::size_t> x_zero_node() const;
  /// True when x = 0 lies inside the domain.
  bool spans_x_zero() const;

  Grid1D x_grid() const;
  Grid1D y_grid() const;
  bool same_layout(const Grid2D& other) const;
};

struct EsaReport {
  double K = 0.0;
  double k = 0.0;
  std::size_t annuli_checked = 0;
  double harmonic_partial_sum = 0.0;
  bool holds = false;
};

/// Checks the annulus criterion for essential self-adjointness of the regular model
/// with a_m = m, b_m = m + 1, nu_m = m + 1.
EsaReport esa_condition_check(const ModelParams& p, const PotentialSpec& V,
                              std::size_t annuli = 64);

}  // namespace magspec
