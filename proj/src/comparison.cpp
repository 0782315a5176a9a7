#include "magspec/comparison.hpp"

#include <lapacke.h>

#include <algorithm>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <numbers>

namespace magspec {

std::vector<double> Tridiag::apply(const std::vector<double>& v) const {
  const std::size_t n = size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = diag[i] * v[i];
    if (i > 0) s += offdiag[i - 1] * v[i - 1];
    if (i + 1 < n) s += offdiag[i] * v[i + 1];
    out[i] = s;
  }
  return out;
}

double delta_diagonal(double strength, double h, DeltaScheme scheme) {
  if (strength == 0.0) return 0.0;
  if (scheme == DeltaScheme::NodeBump) return strength / h;
  const double kappa = 0.5 * std::abs(strength);
  const double q = 2.0 + kappa * kappa * h * h;
  // smaller root of r + 1/r = q, written to avoid cancellation
  const double r = 2.0 / (q + std::sqrt(q * q - 4.0));
  const double bump = kappa * kappa + 2.0 * (1.0 - r) / (h * h);
  return strength < 0.0 ? -bump : bump;
}

double exact_inf_L(double omega, double lambda) {
  return lambda < 0.0 ? omega * omega - 0.25 * lambda * lambda : omega * omega;
}

double delta_eigenfunction(double lambda, double x) {
  const double a = std::abs(lambda);
  return std::sqrt(0.5 * a) * std::exp(-0.5 * a * std::abs(x));
}

double default_domain_1d(double omega, double lambda) {
  double m = std::max(1.0, 2.0 / omega);
  if (lambda != 0.0) m = std::max(m, 2.0 / std::abs(lambda));
  return 20.0 * m;
}

Tridiag assemble_L(double omega, double lambda, const Grid1D& grid,
                   const std::optional<PotentialSpec>& V, bool include_omega, DeltaScheme scheme) {
  require(grid.n >= 3 && grid.h > 0.0, ErrorCode::InvalidGrid, "grid too small");
  const std::size_t n = grid.n;
  const double ih2 = 1.0 / (grid.h * grid.h);
  Tridiag T{std::vector<double>(n, 2.0 * ih2), std::vector<double>(n - 1, -ih2), grid};
  if (grid.bc == BoundaryCondition::Neumann) {
    T.diag.front() = ih2;
    T.diag.back() = ih2;
  }
  const double shift = include_omega ? omega * omega : 0.0;
  for (double& d : T.diag) d += shift;
  if (V) {
    if (lambda != 0.0)
      for (std::size_t i = 0; i < n; ++i) T.diag[i] += lambda * (*V)(grid.x(i));
    return T;
  }
  if (lambda != 0.0) {
    require(grid.h <= 0.1 / std::abs(lambda), ErrorCode::GridTooCoarse,
            "h must not exceed 0.1/|lambda| to resolve the point interaction");
    const long long i0 =
        static_cast<long long>(grid.middle()) - std::llround(grid.center / grid.h);
    require(i0 >= 0 && static_cast<std::size_t>(i0) < n &&
                std::abs(grid.x(static_cast<std::size_t>(i0))) <= 1e-9 * grid.h,
            ErrorCode::GridMisaligned, "x = 0 is not a grid node");
    T.diag[static_cast<std::size_t>(i0)] += delta_diagonal(lambda, grid.h, scheme);
  }
  return T;
}

namespace {

struct TridiagEigs {
  std::vector<double> values;
  std::vector<lapack_int> iblock, isplit;
};

TridiagEigs stebz(const Tridiag& T, std::size_t first, std::size_t last) {
  const auto n = static_cast<lapack_int>(T.size());
  require(last < T.size(), ErrorCode::DimensionTooSmall, "eigenvalue index exceeds dimension");
  TridiagEigs out;
  out.values.resize(T.size());
  out.iblock.resize(T.size());
  out.isplit.resize(T.size());
  lapack_int m = 0, nsplit = 0;
  const double abstol = 2.0 * LAPACKE_dlamch('S');
  const lapack_int info = LAPACKE_dstebz(
      'I', 'B', n, 0.0, 0.0, static_cast<lapack_int>(first + 1), static_cast<lapack_int>(last + 1),
      abstol, T.diag.data(), T.offdiag.data(), &m, &nsplit, out.values.data(), out.iblock.data(),
      out.isplit.data());
  if (info != 0) throw Error(ErrorCode::NoConvergence, "tridiagonal bisection failed");
  out.values.resize(static_cast<std::size_t>(m));
  out.iblock.resize(static_cast<std::size_t>(m));
  return out;
}

}  // namespace

double tridiag_eigenvalue(const Tridiag& T, std::size_t index) {
  return stebz(T, index, index).values.at(0);
}

std::vector<double> lowest_eigenvalues_1d(const Tridiag& T, std::size_t k) {
  require(k >= 1, ErrorCode::InvalidParameter, "k must be positive");
  auto v = stebz(T, 0, k - 1).values;
  std::sort(v.begin(), v.end());
  return v;
}

std::vector<double> solve_shifted(const Tridiag& T, double shift, std::vector<double> rhs) {
  const auto n = static_cast<lapack_int>(T.size());
  std::vector<double> dl(T.offdiag), du(T.offdiag), d(T.diag), du2(T.size());
  std::vector<lapack_int> ipiv(T.size());
  for (double& x : d) x -= shift;
  lapack_int info = LAPACKE_dgttrf(n, dl.data(), d.data(), du.data(), du2.data(), ipiv.data());
  if (info != 0) throw Error(ErrorCode::SolveFailed, "singular tridiagonal system");
  info = LAPACKE_dgttrs(LAPACK_COL_MAJOR, 'N', n, 1, dl.data(), d.data(), du.data(), du2.data(),
                        ipiv.data(), rhs.data(), n);
  if (info != 0) throw Error(ErrorCode::SolveFailed, "tridiagonal back-substitution failed");
  return rhs;
}

Eigenpair1D eigenpair_1d(const Tridiag& T, std::size_t index) {
  const TridiagEigs e = stebz(T, index, index);
  const auto n = static_cast<lapack_int>(T.size());
  std::vector<double> z(T.size());
  lapack_int ifail = 0;
  const lapack_int info =
      LAPACKE_dstein(LAPACK_COL_MAJOR, n, T.diag.data(), T.offdiag.data(), 1, e.values.data(),
                     e.iblock.data(), e.isplit.data(), z.data(), n, &ifail);
  if (info != 0) throw Error(ErrorCode::NoConvergence, "inverse iteration failed");

  Eigenpair1D out;
  out.value = e.values[0];
  const std::vector<double> tz = T.apply(z);
  double r2 = 0.0, n2 = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    r2 += (tz[i] - out.value * z[i]) * (tz[i] - out.value * z[i]);
    n2 += z[i] * z[i];
  }
  out.residual = std::sqrt(r2 / n2);
  const auto peak = std::max_element(z.begin(), z.end(),
                                     [](double a, double b) { return std::abs(a) < std::abs(b); });
  const double sign = *peak < 0.0 ? -1.0 : 1.0;
  const double scale = sign / std::sqrt(n2 * T.grid.h);
  for (double& x : z) x *= scale;
  out.vector = std::move(z);
  return out;
}

double inf_spectrum_1d(const Tridiag& T, double tol) {
  require(tol > 0.0, ErrorCode::InvalidParameter, "tol must be positive");
  const Eigenpair1D p = eigenpair_1d(T, 0);
  double norm = 0.0;
  for (std::size_t i = 0; i < T.size(); ++i) {
    double row = std::abs(T.diag[i]);
    if (i > 0) row += std::abs(T.offdiag[i - 1]);
    if (i + 1 < T.size()) row += std::abs(T.offdiag[i]);
    norm = std::max(norm, row);
  }
  if (p.residual > tol * std::max(1.0, norm))
    throw Error(ErrorCode::NoConvergence, "eigenvector residual above tolerance");
  return p.value;
}

Grid1D default_potential_grid(double omega, const PotentialSpec& V) {
  const double target = std::min(0.005, V.s0() / 25.0);
  const double decade = std::pow(10.0, std::floor(std::log10(target)));
  double h = decade;
  for (double m : {5.0, 2.0})
    if (m * decade <= target) {
      h = m * decade;
      break;
    }
  const double l0 = V.s0() + 20.0 * std::max(1.0, 2.0 / omega);
  const auto half = static_cast<std::size_t>(std::ceil(l0 / h));
  return Grid1D{static_cast<double>(half) * h, 2 * half + 1, h, BoundaryCondition::Dirichlet, 0.0};
}

double critical_lambda(double omega, const PotentialSpec& V, const CriticalOptions& options) {
  require(omega > 0.0, ErrorCode::RejectsNonpositiveOmega, "omega must be > 0");
  require(!V.is_zero(), ErrorCode::InvalidPotential, "potential vanishes identically");
  const Grid1D grid = options.grid ? *options.grid : default_potential_grid(omega, V);
  const std::optional<PotentialSpec> pot(V);
  auto bottom = [&](double lambda) {
    return tridiag_eigenvalue(assemble_L(omega, lambda, grid, pot), 0);
  };

  double hi = -options.tol;
  constexpr double kMaxCoupling = 1e6;
  double lo = std::max(-kMaxCoupling, -4.0 * omega * (V.s0() + 1.0) / V.integral());
  double f_lo = bottom(lo);
  while (f_lo >= 0.0) {
    if (lo <= -kMaxCoupling)
      throw Error(ErrorCode::BracketFailure, "no sign change for |lambda| <= 1e6");
    hi = lo;
    lo = std::max(-kMaxCoupling, 2.0 * lo);
    f_lo = bottom(lo);
  }
  double f_hi = bottom(hi);
  if (f_hi <= 0.0) throw Error(ErrorCode::BracketFailure, "L(V) not positive near lambda = 0");

  boost::uintmax_t max_iter = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(
      bottom, lo, hi, f_lo, f_hi, boost::math::tools::eps_tolerance<double>(50), max_iter);
  const double fa = bottom(a), fb = bottom(b);
  const double root = std::abs(fa) <= std::abs(fb) ? a : b;
  if (std::min(std::abs(fa), std::abs(fb)) > options.tol)
    throw Error(ErrorCode::NoConvergence, "critical coupling not resolved to tolerance");
  return root;
}

double GroundData::operator()(double x) const {
  if (closed_form) return closed_form(x);
  if (!grid || samples.empty()) return 0.0;
  const double u = (x - grid->x(0)) / grid->h;
  if (u < 0.0 || u > static_cast<double>(grid->n - 1)) return 0.0;
  auto i = static_cast<std::size_t>(std::floor(u));
  if (i >= grid->n - 1) i = grid->n - 2;
  const double t = u - static_cast<double>(i);
  return (1.0 - t) * samples[i] + t * samples[i + 1];
}

GroundData oscillator_ground(double omega, double b_field) {
  require(omega > 0.0, ErrorCode::RejectsNonpositiveOmega, "omega must be > 0");
  const double a = std::sqrt(omega * omega + b_field * b_field);
  GroundData g;
  g.energy = a;
  const double c = std::pow(a / std::numbers::pi, 0.25);
  g.closed_form = [a, c](double z) { return c * std::exp(-0.5 * a * z * z); };
  return g;
}

GroundData delta_ground(double lambda) {
  require(lambda < 0.0, ErrorCode::InvalidParameter, "attractive coupling required");
  GroundData g;
  g.energy = -0.25 * lambda * lambda;
  g.closed_form = [lambda](double x) { return delta_eigenfunction(lambda, x); };
  return g;
}

GroundData numeric_ground(double omega, double lambda, const Grid1D& grid,
                          const std::optional<PotentialSpec>& V, DeltaScheme scheme) {
  const Tridiag T = assemble_L(omega, lambda, grid, V, true, scheme);
  Eigenpair1D p = eigenpair_1d(T, 0);
  GroundData g;
  g.energy = p.value;
  g.grid = grid;
  g.samples = std::move(p.vector);
  return g;
}

double inf_L_eps(double omega, double lambda, double eps, const PotentialSpec& V,
                 const std::optional<Grid1D>& grid) {
  require(eps > 0.0 && eps < 1.0, ErrorCode::InvalidParameter, "eps must lie in (0, 1)");
  const Grid1D g = grid ? *grid : default_potential_grid(omega, V);
  return tridiag_eigenvalue(assemble_L(omega, lambda / (1.0 - eps), g, V), 0);
}

}  // namespace magspec
