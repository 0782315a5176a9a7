#include "magspec/fiber.hpp"

#include <algorithm>
#include <cmath>

namespace magspec {

namespace {

Grid1D exact_spacing_grid(double l, double h) {
  const auto half = static_cast<std::size_t>(std::max(1.0, std::ceil(l / h - 1e-9)));
  return Grid1D{static_cast<double>(half) * h, 2 * half + 1, h, BoundaryCondition::Neumann, 0.0};
}

}  // namespace

Grid1D fiber_grid(double n, double h) {
  require(n > 0.0 && h > 0.0, ErrorCode::InvalidGrid, "strip half-width and spacing must be positive");
  return exact_spacing_grid(n, h);
}

Tridiag fiber_operator(const ModelParams& params, double xi, double n, const Grid1D& grid) {
  require(n > 0.0, ErrorCode::InvalidParameter, "strip half-width must be positive");
  const double a = params.transverse_frequency();
  require(grid.h <= 0.25 / std::sqrt(a), ErrorCode::GridTooCoarse,
          "spacing must resolve the transverse oscillator length");
  Grid1D g = grid;
  g.bc = BoundaryCondition::Neumann;
  Tridiag T = assemble_L(0.0, 0.0, g, std::nullopt, false);
  const double w2 = params.omega * params.omega, B = params.b_field;
  for (std::size_t i = 0; i < g.n; ++i) {
    const double y = g.x(i);
    T.diag[i] += w2 * y * y + (B * y - xi) * (B * y - xi);
  }
  return T;
}

std::pair<double, double> default_xi_range(const ModelParams& params, double n) {
  const double a = params.transverse_frequency();
  if (params.b_field > 0.0) {
    const double r = a * a * (n + 5.0 / std::sqrt(a)) / params.b_field;
    return {-r, r};
  }
  const double r = std::sqrt(2.0 * a);
  return {-r, r};
}

BandFunction band_scan(const ModelParams& params, double n, std::pair<double, double> xi_range,
                       std::size_t n_xi, double h) {
  require(n_xi >= 3, ErrorCode::InvalidParameter, "need at least 3 xi samples");
  require(xi_range.second >= xi_range.first, ErrorCode::InvalidParameter, "empty xi range");
  const Grid1D grid = fiber_grid(n, h);
  BandFunction band;
  band.n = n;
  band.minimum = INFINITY;
  for (std::size_t q = 0; q < n_xi; ++q) {
    const double xi = xi_range.first + (xi_range.second - xi_range.first) *
                                           static_cast<double>(q) / static_cast<double>(n_xi - 1);
    const Eigenpair1D p = eigenpair_1d(fiber_operator(params, xi, n, grid), 0);
    band.xi_samples.push_back(xi);
    band.band_min.push_back(p.value);
    band.residuals.push_back(p.residual);
    if (p.value < band.minimum) {
      band.minimum = p.value;
      band.argmin = xi;
    }
  }
  return band;
}

double discrete_threshold(const ModelParams& params, double h) {
  const double a = params.transverse_frequency();
  const double n = 14.0 / std::sqrt(a);
  return tridiag_eigenvalue(fiber_operator(params, 0.0, n, fiber_grid(n, h)), 0);
}

BracketingCertificate bracketing_lower_bound_sm(const ModelParams& params, double n, double h,
                                                std::size_t n_xi) {
  validate_params(params);
  const double w = params.omega, lambda = params.lambda;
  if (lambda < -2.0 * w)
    throw Error(ErrorCode::SupercriticalInput, "bracketing bound is vacuous for lambda < -2 omega");
  require(n > 0.0, ErrorCode::InvalidParameter, "strip half-width must be positive");

  BracketingCertificate c;
  c.n = n;
  const double w2 = w * w;
  c.pieces.push_back({"outer+", n * n * exact_inf_L(w, lambda)});
  c.pieces.push_back({"outer-", n * n * w2});

  // Row by row the x-part obeys |i u_x - B y u|^2 + lambda y |u(0,y)|^2 >= -(lambda y)^2/4 |u|^2
  // on the attractive side, so the strip is bounded below by a Neumann oscillator.
  const double c_min = std::min(exact_inf_L(w, lambda), w2);
  const Grid1D grid = fiber_grid(n, h);
  Tridiag T = assemble_L(0.0, 0.0, grid, std::nullopt, false);
  for (std::size_t i = 0; i < grid.n; ++i) T.diag[i] += c_min * grid.x(i) * grid.x(i);
  c.pieces.push_back({"central", tridiag_eigenvalue(T, 0)});

  c.overall_lower_bound = INFINITY;
  for (const auto& p : c.pieces) c.overall_lower_bound = std::min(c.overall_lower_bound, p.lower_bound);
  c.central_essential = band_scan(params, n, default_xi_range(params, n), n_xi, h).minimum;
  return c;
}

GrowthTable bracketing_growth_regular(const ModelParams& params, const PotentialSpec& V, double eps,
                                      const std::vector<double>& n_list,
                                      const std::optional<Grid1D>& grid) {
  GrowthTable t;
  t.eps = eps;
  t.inf_l_eps = inf_L_eps(params.omega, params.lambda, eps, V, grid);
  if (t.inf_l_eps <= 0.0)
    throw Error(ErrorCode::NotSubcritical, "inf sigma(L_eps(V)) is not positive");
  std::vector<double> lx, ly;
  for (double n : n_list) {
    require(n >= 1.0, ErrorCode::InvalidParameter, "strip index must be >= 1");
    const double g = 1.0 + std::log(n);
    const double b = (1.0 - eps) * g * g * t.inf_l_eps;
    t.rows.push_back({n, b});
    lx.push_back(std::log(g));
    ly.push_back(std::log(b));
  }
  if (lx.size() >= 2) {
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      mx += lx[i];
      my += ly[i];
    }
    mx /= static_cast<double>(lx.size());
    my /= static_cast<double>(lx.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      sxy += (lx[i] - mx) * (ly[i] - my);
      sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    t.fitted_exponent = sxx > 0.0 ? sxy / sxx : 0.0;
  }
  return t;
}

double fit_inverse_n(const std::vector<double>& n, const std::vector<double>& d) {
  require(n.size() == d.size() && !n.empty(), ErrorCode::InvalidParameter, "size mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n.size(); ++i) {
    num += d[i] / n[i];
    den += 1.0 / (n[i] * n[i]);
  }
  return num / den;
}

}  // namespace magspec
