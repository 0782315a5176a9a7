#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "magspec/sparse.hpp"

namespace magspec {

/// xorshift64* generator: x ^= x >> 12; x ^= x << 25; x ^= x >> 27; out = x * 2685821657736338717.
class XorShift64Star {
 public:
  explicit XorShift64Star(std::uint64_t seed) : state_(seed ? seed : 0x9E3779B97F4A7C15ULL) {}
  std::uint64_t next() {
    state_ ^= state_ >> 12;
    state_ ^= state_ << 25;
    state_ ^= state_ >> 27;
    return state_ * 2685821657736338717ULL;
  }
  /// Uniform in [-1, 1).
  double symmetric() { return static_cast<double>(next() >> 11) * 0x1.0p-52 - 1.0; }

 private:
  std::uint64_t state_;
};

struct SpectrumResult {
  std::vector<double> eigenvalues;
  std::vector<double> residual_norms;
  std::size_t iterations = 0;
  bool converged = false;
  std::uint64_t seed = 0;
  std::vector<std::vector<cplx>> eigenvectors;
  std::optional<double> shift;  // set when a shift-invert transform was used
};

/// Which end of the spectrum of the iterated operator to target.
enum class Target { Smallest, Largest, LargestMagnitude };

struct LanczosOptions {
  std::size_t k = 1;
  double tol = 1e-8;
  std::size_t max_iter = 20000;  // total Lanczos steps (matvecs)
  std::uint64_t seed = 1;
  std::size_t krylov_dim = 0;    // 0: automatic
  bool want_vectors = false;
  Target target = Target::Smallest;
};

/// y = A x for a Hermitian operator of the given dimension.
struct LinearOperator {
  std::size_t dim = 0;
  std::function<void(const cplx*, cplx*)> apply;
};

/// Thick-restart Lanczos with full (two-pass) reorthogonalization. Residuals are those of the
/// iterated operator.
SpectrumResult lanczos(const LinearOperator& A, const LanczosOptions& options);

/// The k smallest eigenpairs of H; every returned pair has ||Hv - Ev|| / ||v|| <= tol when
/// `converged` is set.
SpectrumResult lowest_eigs(const SparseHermitian& H, std::size_t k, double tol = 1e-8,
                           std::size_t max_iter = 20000, std::uint64_t seed = 1);
SpectrumResult lowest_eigs(const SparseHermitian& H, const LanczosOptions& options);

/// Shift-invert variant: Lanczos on (H - sigma)^{-1} with a sparse Cholesky factor. Requires
/// sigma below the spectrum (it is lowered automatically until the shifted matrix is definite).
/// Residuals are recomputed on H.
SpectrumResult lowest_eigs_shift_invert(const SparseHermitian& H, double sigma,
                                        const LanczosOptions& options);

/// Eigenpairs of H closest to sigma (indefinite LDL^H factor of H - sigma).
SpectrumResult eigs_near(const SparseHermitian& H, double sigma, const LanczosOptions& options);

/// Number of eigenvalues of H below sigma via the inertia of an LDL^H factorization.
std::size_t count_below(const SparseHermitian& H, double sigma);

/// Rayleigh quotient and relative residual ||Hv - Ev|| / ||v||.
std::pair<double, double> rayleigh_refine(const SparseHermitian& H, const std::vector<cplx>& v);

}  // namespace magspec
