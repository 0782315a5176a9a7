#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "magspec/comparison.hpp"
#include "magspec/model.hpp"

namespace magspec {

/// Neumann discretization of h(xi) = -d^2/dy^2 + omega^2 y^2 + (B y - xi)^2 on [-n, n]
/// (the same operator as (omega^2+B^2)(y - xi B/(omega^2+B^2))^2 + omega^2 xi^2/(omega^2+B^2)).
Tridiag fiber_operator(const ModelParams& params, double xi, double n, const Grid1D& grid);

/// Default Neumann grid on [-n, n] with spacing <= h.
Grid1D fiber_grid(double n, double h = 0.05);

struct BandFunction {
  std::vector<double> xi_samples;
  std::vector<double> band_min;
  std::vector<double> residuals;
  double n = 0.0;
  double minimum = 0.0;
  double argmin = 0.0;
};

/// Default scan interval |xi| <= (omega^2+B^2)(n + 5/sqrt(a))/B (B > 0), else sqrt(2a).
std::pair<double, double> default_xi_range(const ModelParams& params, double n);

BandFunction band_scan(const ModelParams& params, double n, std::pair<double, double> xi_range,
                       std::size_t n_xi, double h = 0.05);

/// Lowest fiber eigenvalue at xi = 0 on a strip wide enough to be free of boundary effects;
/// the discrete counterpart of sqrt(omega^2 + B^2) at spacing h.
double discrete_threshold(const ModelParams& params, double h = 0.05);

struct BracketingPiece {
  std::string name;
  double lower_bound = 0.0;
};

struct BracketingCertificate {
  double n = 0.0;
  std::vector<BracketingPiece> pieces;
  double overall_lower_bound = 0.0;
  /// Band minimum of the central strip: a lower bound for its essential spectrum only.
  double central_essential = 0.0;
};

/// Lower bound for H_Sm from the decomposition into |y| > n half-planes and the central strip.
BracketingCertificate bracketing_lower_bound_sm(const ModelParams& params, double n,
                                                double h = 0.05, std::size_t n_xi = 201);

struct GrowthRow {
  double n = 0.0;
  double bound = 0.0;
};

struct GrowthTable {
  double eps = 0.0;
  double inf_l_eps = 0.0;
  std::vector<GrowthRow> rows;
  double fitted_exponent = 0.0;  // slope of log(bound) against log(1 + ln n)
};

/// Strip bounds (1 - eps)(1 + ln n)^2 inf sigma(L_eps(V)) for the regular model.
GrowthTable bracketing_growth_regular(const ModelParams& params, const PotentialSpec& V, double eps,
                                      const std::vector<double>& n_list,
                                      const std::optional<Grid1D>& grid = std::nullopt);

/// Least-squares c in d(n) ~ c / n.
double fit_inverse_n(const std::vector<double>& n, const std::vector<double>& d);

}  // namespace magspec
