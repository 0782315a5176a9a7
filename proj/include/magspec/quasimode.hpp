#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "magspec/comparison.hpp"
#include "magspec/hamiltonian.hpp"
#include "magspec/model.hpp"
#include "magspec/sparse.hpp"

namespace magspec {

enum class Construction { SubcriticalPacket, Supercritical, Critical };
std::string_view to_string(Construction c);

/// Complex grid function in the Landau gauge A = (-B y, 0) of the assembled operators.
struct Quasimode {
  Grid2D grid;
  std::vector<cplx> values;
  double mu = 0.0;
  ModelParams params;
  Construction construction = Construction::SubcriticalPacket;
  std::map<std::string, double> meta;

  /// Discrete L^2 norm (sum hx hy |psi|^2)^(1/2).
  double norm() const;
};

/// (delta1, delta2) = sqrt((mu~ -+ eps)(omega^2 + B^2)) / omega with mu~ = mu - sqrt(omega^2 + B^2).
std::pair<double, double> build_E_window(double mu, double eps, double omega, double b_field);

enum class CutoffKind { ChiK_log, ChiFixed, EtaPlateau, ChiPlateau };

/// Plateau profile amplitude * P(u) built from quintic smoothstep ramps of width `ramp` (in u),
/// where u = (z - a)/(b - a), or u = ln z / ln k for ChiK_log.
struct CutoffFamily {
  CutoffKind kind = CutoffKind::ChiFixed;
  double a = 1.0, b = 2.0;
  double ramp = 0.5;
  double amplitude = 1.0;
  double k = 0.0;              // ChiK_log only
  double weighted_norm = 0.0;  // ChiK_log: int z^-1 chi^2; ChiFixed: int chi^2 (by quadrature)
  double eps = 0.0;            // ChiK_log: int z chi'^2 (by quadrature)

  double operator()(double z) const;
  double d1(double z) const;
  double d2(double z) const;
  double sup() const { return amplitude; }
};

/// chi_k with int_1^k chi^2/z = 1 and int_1^k z chi'^2 = O(1/ln^2 k). Throws TargetUnreachable if
/// eps_target is below what k allows, unless allow_rescale grows k until it is reachable.
CutoffFamily make_chi_k(double k, double eps_target, bool allow_rescale = false);
/// Smallest achievable int z chi_k'^2 for this profile family.
double chi_k_min_eps(double k);
/// Supported in [1, 2] with int chi^2 = 1.
CutoffFamily chi_fixed();
/// eta in C^2, supported in [1, m], equal to 1 on [1 + ramp, m - ramp].
CutoffFamily eta_plateau(double m, double ramp = 0.25);
/// chi in C^2, supported in [-1, 1], equal to 1 on [-1 + ramp, 1 - ramp].
CutoffFamily chi_plateau(double ramp = 0.25);

// ---------------------------------------------------------------------------------------------
// Subcritical packets

struct PacketOptions {
  double alpha = 2.0;
  double m = 8.0;
  std::size_t nodes = 256;
  std::size_t max_nodes = 8192;
};

/// Packet grid covering [k, m k] in x (plus two cells) and the transverse localization length
/// of g in y; spacing <= h.
Grid2D packet_grid(const ModelParams& params, double mu, double eps, double k, double m,
                   double h = 0.1);

Quasimode build_subcritical_packet(const ModelParams& params, double mu, double eps, double k,
                                   const PacketOptions& options, const Grid2D& grid);

/// Builds on packet_grid, doubling alpha and m until ||phi||^2 >= 1/64.
Quasimode build_subcritical_packet_auto(const ModelParams& params, double mu, double eps, double k,
                                        double h = 0.1, PacketOptions options = {},
                                        int max_doublings = 3);

// ---------------------------------------------------------------------------------------------
// Supercritical channel

/// x -> x / s, y -> y / s maps H(omega, lambda, B) to s^-2 H(omega s^2, lambda s^2, B s^2)
/// (lambda s^4 and V(s^2 .) for the regular model), with s chosen so that the rescaled
/// comparison operator has inf sigma = -1.
struct ScalingMap {
  double s = 1.0;
  ModelParams original;
  ModelParams normalized;

  double to_normalized_mu(double mu) const { return s * s * mu; }
  double from_normalized_mu(double mu) const { return mu / (s * s); }
};

ScalingMap normalize_supercritical(const ModelParams& params,
                                   const std::optional<Grid1D>& grid = std::nullopt);

struct FSolution {
  Grid1D grid;
  std::vector<cplx> f;
  std::vector<double> h;            // discrete ground state used in the right-hand side
  double ground_energy = 0.0;       // its eigenvalue (-1 up to discretization)
  double ode_residual = 0.0;        // max |(L + 1) f - g_rhs| over nodes with |t| > 2 h
  double orthogonality_defect = 0.0;
  double b_field = 0.0;
};

/// |int (2 i t h' + i h + 2 B t h) h dt| for the analytic delta ground state h.
double orthogonality_integral(double omega, double lambda, double b_field);

/// Solves -f'' + (1 + omega^2) f + lambda (delta or V) f = 2 i t h' + i h + 2 B t h in the
/// orthogonal complement of h. Requires inf sigma(L) = -1.
FSolution solve_f_ode(const ModelParams& normalized, const Grid1D& grid);
/// Default grid: |t| <= 40/kappa, spacing 0.005 / max(1, kappa).
Grid1D default_f_grid(const ModelParams& normalized);

/// Channel profile t -> h(t), f(t) with first derivatives; second derivatives follow from
/// h'' = q h and f'' = q f - g_rhs away from the coupling.
struct ChannelProfile {
  std::function<double(double)> h, dh, q;
  std::function<cplx(double)> f, df;
  double b_field = 0.0;
  double t_max = 0.0;
};

/// Closed form for the delta model (kappa = |lambda|/2, h = sqrt(kappa) e^{-kappa |t|}).
ChannelProfile delta_channel_profile(const ModelParams& normalized);
/// Cubic interpolation of a numerical solution.
ChannelProfile interpolated_profile(const ModelParams& normalized, const FSolution& f);

/// int_{sqrt|mu|}^y sqrt(t^2 + mu) dt by adaptive Gauss-Kronrod quadrature.
double eps_mu_phase(double mu, double y);

struct ContinuumResidual {
  double norm = 0.0;      // ||psi||
  double residual = 0.0;  // ||H psi - mu psi||
  double eps = 0.0;       // int z chi_k'^2
};

/// Exact norms of the channel quasimode by two-dimensional quadrature in (t, ln y).
ContinuumResidual supercritical_continuum(const ModelParams& normalized, double mu,
                                          const CutoffFamily& chi, double n_k,
                                          const ChannelProfile& profile);

/// Grid sampling of the channel quasimode (normalized units). Throws SupportOverflow if the
/// grid does not contain [n_k, k n_k] in y.
Quasimode build_supercritical(const ModelParams& normalized, double mu, const CutoffFamily& chi,
                              double n_k, const ChannelProfile& profile, const Grid2D& grid);

/// n_{k_j} > k_{j-1} n_{k_{j-1}}: next admissible channel start.
double next_channel_start(double k_prev, double n_prev);

// ---------------------------------------------------------------------------------------------
// Critical channel

/// Grid on [-X, X] x [n - 1, 2n + 1] with X = 28/(omega n).
Grid2D critical_grid(const ModelParams& params, double n, double hy = 0.05, std::size_t nx = 601);

/// psi_n = h(x y) e^{i sqrt(mu) y} chi(y/n), with h the lattice bound state of each row (exact
/// for LatticeMatched coupling) and the gauge factor e^{-i B x y}.
Quasimode build_critical(const ModelParams& params, double mu, double n, const Grid2D& grid);

// ---------------------------------------------------------------------------------------------

/// ||H psi - mu psi|| / ||psi|| on the quasimode's grid.
double residual(const Quasimode& q, const SparseHermitian& H);
/// Assembles H on q.grid with the given options and evaluates the residual.
double residual(const Quasimode& q, const AssemblyOptions& options);

/// `x,y,re,im` rows plus `<path>.json` with the construction metadata.
void write_quasimode(const std::filesystem::path& csv_path, const Quasimode& q);

}  // namespace magspec
