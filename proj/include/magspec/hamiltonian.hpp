#pragma once

#include <filesystem>
#include <vector>

#include "magspec/comparison.hpp"
#include "magspec/model.hpp"
#include "magspec/sparse.hpp"

namespace magspec {

/// Magnetic discretization in the Landau gauge A = (-B y, 0).
///  Peierls:       x-hopping -exp(+-i B y_j hx)/hx^2.
///  DirectCentral: real Laplacian - 2 i B y d/dx (central) + B^2 y^2.
enum class DiscretizationScheme { Peierls, DirectCentral };

std::string_view to_string(DiscretizationScheme s);
std::string_view to_string(DeltaScheme s);

struct AssemblyOptions {
  DiscretizationScheme scheme = DiscretizationScheme::Peierls;
  DeltaScheme delta = DeltaScheme::LatticeMatched;
  /// When false the lambda <= 0 restriction is lifted (mirror-symmetry checks only).
  bool enforce_sign = true;
  /// Accept omega = 0 (pure Landau problem, no confinement).
  bool allow_zero_omega = false;
};

/// Index j * nx + i. Dirichlet: couplings to nodes outside the grid are dropped.
/// Neumann: graph Laplacian (missing edges are removed together with their diagonal share).
SparseHermitian assemble(const ModelParams& params, const Grid2D& grid,
                         const AssemblyOptions& options = {});
SparseHermitian assemble(const ModelParams& params, const Grid2D& grid,
                         DiscretizationScheme scheme);

/// -Laplacian + (omega^2 + B^2) y^2 + coupling term, real symmetric.
SparseSymmetric assemble_nonmagnetic_tilde(const ModelParams& params, const Grid2D& grid,
                                           DeltaScheme delta = DeltaScheme::LatticeMatched);

SparseHermitian to_hermitian(const SparseSymmetric& S);

/// Re<u, H u> / <u, u>.
double form_value(const SparseHermitian& H, const std::vector<cplx>& u);
double form_value(const SparseSymmetric& S, const std::vector<double>& u);

/// max |H_ij - conj(H_ji)| over stored entries (0 for exact construction).
double hermiticity_defect(const SparseHermitian& H);

/// Permutation p with p[index(i, j)] = index(nx-1-i, ny-1-j): the map (x, y) -> (-x, -y).
std::vector<std::size_t> mirror_permutation(const Grid2D& grid);

/// Coordinate format, complex Hermitian, lower triangle, 1-based.
void write_matrix_market(const std::filesystem::path& path, const SparseHermitian& H);

}  // namespace magspec
