#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "magspec/model.hpp"

namespace magspec {

/// Symmetric tridiagonal matrix on a 1D grid (offdiag[i] couples i and i+1).
struct Tridiag {
  std::vector<double> diag;
  std::vector<double> offdiag;
  Grid1D grid;

  std::size_t size() const { return diag.size(); }
  std::vector<double> apply(const std::vector<double>& v) const;
};

/// How a point interaction of strength s at a node enters the diagonal.
///  NodeBump:       s / h (form-consistent, first order).
///  LatticeMatched: bump chosen so that the lattice bound state of -u'' + s delta has the
///                  continuum energy -s^2/4 exactly (mirrored for s > 0).
enum class DeltaScheme { NodeBump, LatticeMatched };

double delta_diagonal(double strength, double h, DeltaScheme scheme);

double exact_inf_L(double omega, double lambda);
double delta_eigenfunction(double lambda, double x);

/// Discretizes -d^2/dx^2 (+ omega^2) + lambda delta(x), or + lambda V(x) when V is given.
Tridiag assemble_L(double omega, double lambda, const Grid1D& grid,
                   const std::optional<PotentialSpec>& V = std::nullopt, bool include_omega = true,
                   DeltaScheme scheme = DeltaScheme::NodeBump);

/// Default truncation l = 20 max(1, 2/|lambda|, 2/omega).
double default_domain_1d(double omega, double lambda);

/// Eigenvalue with index `index` (0-based, ascending) by bisection to machine precision.
double tridiag_eigenvalue(const Tridiag& T, std::size_t index);
std::vector<double> lowest_eigenvalues_1d(const Tridiag& T, std::size_t k);

/// Solves (T - shift I) x = rhs with a pivoted tridiagonal LU. Throws SolveFailed if singular.
std::vector<double> solve_shifted(const Tridiag& T, double shift, std::vector<double> rhs);

struct Eigenpair1D {
  double value = 0.0;
  std::vector<double> vector;  // normalized with sum h |v_i|^2 = 1
  double residual = 0.0;       // Euclidean residual of the unit-2-norm vector
};
Eigenpair1D eigenpair_1d(const Tridiag& T, std::size_t index = 0);

/// Smallest eigenvalue with certified residual <= tol.
double inf_spectrum_1d(const Tridiag& T, double tol = 1e-9);

struct CriticalOptions {
  std::optional<Grid1D> grid;
  double tol = 1e-10;
};

/// Coupling lambda* < 0 at which inf sigma(L(V)) crosses zero.
double critical_lambda(double omega, const PotentialSpec& V, const CriticalOptions& options = {});
/// Grid used by critical_lambda when none is supplied.
Grid1D default_potential_grid(double omega, const PotentialSpec& V);

/// Energy and profile of a one-dimensional ground state.
struct GroundData {
  double energy = 0.0;
  std::optional<Grid1D> grid;
  std::vector<double> samples;
  std::function<double(double)> closed_form;

  double operator()(double x) const;
};

GroundData oscillator_ground(double omega, double b_field);
GroundData delta_ground(double lambda);
/// Numerical ground state of L(V) (or L when V is empty), normalized in L^2.
GroundData numeric_ground(double omega, double lambda, const Grid1D& grid,
                          const std::optional<PotentialSpec>& V = std::nullopt,
                          DeltaScheme scheme = DeltaScheme::NodeBump);

/// inf sigma(-d^2/dt^2 + omega^2 + lambda/(1-eps) V).
double inf_L_eps(double omega, double lambda, double eps, const PotentialSpec& V,
                 const std::optional<Grid1D>& grid = std::nullopt);

}  // namespace magspec
