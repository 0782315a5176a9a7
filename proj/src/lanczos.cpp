#include "magspec/lanczos.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "magspec/errors.hpp"

namespace magspec {

namespace {

using Basis = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic>;
using CVec = Eigen::Matrix<cplx, Eigen::Dynamic, 1>;

double target_key(Target t, double theta) {
  switch (t) {
    case Target::Smallest: return theta;
    case Target::Largest: return -theta;
    case Target::LargestMagnitude: return -std::abs(theta);
  }
  return theta;
}

void fill_random(XorShift64Star& rng, Eigen::Ref<CVec> v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double re = rng.symmetric();
    v(i) = cplx(re, rng.symmetric());
  }
}

// Two classical Gram-Schmidt passes against the first `cols` basis vectors.
CVec orthogonalize(const Basis& V, Eigen::Index cols, Eigen::Ref<CVec> w) {
  CVec c = V.leftCols(cols).adjoint() * w;
  w.noalias() -= V.leftCols(cols) * c;
  CVec c2 = V.leftCols(cols).adjoint() * w;
  w.noalias() -= V.leftCols(cols) * c2;
  return c + c2;
}

// Residual scaling maps the Ritz residual of the iterated operator to the quantity tested
// against the tolerance. When `verify` is given, a pass of the estimate is confirmed by the
// explicit residual it returns for each Ritz pair; a failed confirmation tightens the estimate.
using Verifier = std::function<double(const CVec&, double)>;

SpectrumResult run_lanczos(const LinearOperator& A, const LanczosOptions& o,
                           const std::function<double(double)>& residual_scale,
                           const Verifier& verify = {}) {
  const std::size_t n = A.dim;
  const std::size_t k = o.k;
  require(k >= 1, ErrorCode::InvalidParameter, "k must be positive");
  require(k < n, ErrorCode::DimensionTooSmall, "k must be smaller than the dimension");
  require(o.tol > 0.0, ErrorCode::InvalidParameter, "tol must be positive");

  std::size_t m = o.krylov_dim ? o.krylov_dim : std::max<std::size_t>(2 * k + 20, 40);
  m = std::min(std::max(m, k + 2), n);
  const auto N = static_cast<Eigen::Index>(n);
  const auto M = static_cast<Eigen::Index>(m);

  Basis V(N, M + 1);
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(M, M);
  XorShift64Star rng(o.seed);
  fill_random(rng, V.col(0));
  V.col(0) /= V.col(0).norm();

  SpectrumResult result;
  result.seed = o.seed;
  CVec w(N);
  Eigen::Index kept = 0;
  double scale = 0.0;
  Eigen::VectorXd theta;
  Eigen::MatrixXd Y;
  std::vector<Eigen::Index> order;
  std::vector<double> estimate;
  Eigen::Index used = 0;
  double beta_last = 0.0;
  double tighten = 1.0;

  for (;;) {
    used = M;
    for (Eigen::Index j = kept; j < M; ++j) {
      A.apply(V.col(j).data(), w.data());
      ++result.iterations;
      const CVec c = orthogonalize(V, j + 1, w);
      T(j, j) = c(j).real();
      double beta = w.norm();
      scale = std::max({scale, std::abs(T(j, j)), beta});
      if (static_cast<std::size_t>(j + 1) == n) {
        beta = 0.0;
        used = j + 1;
        beta_last = 0.0;
        break;
      }
      if (beta <= 1e-13 * scale) {
        // invariant subspace: continue with a fresh direction
        beta = 0.0;
        double nr = 0.0;
        for (int attempt = 0; attempt < 3 && nr <= 1e-8; ++attempt) {
          fill_random(rng, w);
          orthogonalize(V, j + 1, w);
          nr = w.norm();
        }
        if (nr <= 1e-8) throw Error(ErrorCode::BreakdownUnrecoverable, "cannot extend Krylov basis");
        V.col(j + 1) = w / nr;
      } else {
        V.col(j + 1) = w / beta;
      }
      if (j + 1 < M) {
        T(j, j + 1) = beta;
        T(j + 1, j) = beta;
      } else {
        beta_last = beta;
      }
      if (result.iterations >= o.max_iter) {
        used = j + 1;
        if (j + 1 < M) beta_last = beta;
        break;
      }
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T.topLeftCorner(used, used));
    theta = es.eigenvalues();
    Y = es.eigenvectors();
    order.resize(static_cast<std::size_t>(used));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return target_key(o.target, theta(a)) < target_key(o.target, theta(b));
    });
    estimate.assign(k, 0.0);
    bool done = true;
    for (std::size_t i = 0; i < k && i < order.size(); ++i) {
      const Eigen::Index c = order[i];
      estimate[i] = std::abs(beta_last * Y(used - 1, c)) * residual_scale(theta(c));
      done = done && estimate[i] <= 0.5 * o.tol * tighten;
    }
    const bool exhausted = static_cast<std::size_t>(used) == n;
    if (done && verify && !exhausted) {
      CVec x(N);
      for (std::size_t i = 0; i < k && done; ++i) {
        x = V.leftCols(used) * Y.col(order[i]).cast<cplx>();
        x /= x.norm();
        done = verify(x, theta(order[i])) <= o.tol;
      }
      if (!done) tighten *= 0.1;
    }
    if (done || exhausted || result.iterations >= o.max_iter || order.size() < k) {
      result.converged = done || exhausted;
      break;
    }

    const Eigen::Index keep =
        std::min<Eigen::Index>(static_cast<Eigen::Index>(k + (m - k) / 2), M - 1);
    Eigen::MatrixXd Ysel(used, keep);
    for (Eigen::Index i = 0; i < keep; ++i) Ysel.col(i) = Y.col(order[static_cast<std::size_t>(i)]);
    const Basis kept_basis = V.leftCols(used) * Ysel.cast<cplx>();
    V.leftCols(keep) = kept_basis;
    V.col(keep) = V.col(used);
    T.setZero();
    for (Eigen::Index i = 0; i < keep; ++i) {
      T(i, i) = theta(order[static_cast<std::size_t>(i)]);
      const double s = beta_last * Ysel(used - 1, i);
      T(i, keep) = s;
      T(keep, i) = s;
    }
    kept = keep;
  }

  // Ritz vectors, explicit residuals, ascending order
  const std::size_t kk = std::min(k, order.size());
  std::vector<std::pair<double, std::size_t>> pick;
  for (std::size_t i = 0; i < kk; ++i) pick.emplace_back(theta(order[i]), i);
  std::sort(pick.begin(), pick.end());
  CVec x(N), ax(N);
  for (const auto& [value, i] : pick) {
    x = V.leftCols(used) * Y.col(order[i]).cast<cplx>();
    x /= x.norm();
    A.apply(x.data(), ax.data());
    result.eigenvalues.push_back(value);
    result.residual_norms.push_back((ax - value * x).norm());
    if (o.want_vectors) result.eigenvectors.emplace_back(x.data(), x.data() + N);
  }
  return result;
}

Eigen::SparseMatrix<cplx> to_eigen(const SparseHermitian& H) {
  std::vector<Eigen::Triplet<cplx>> t;
  t.reserve(H.nnz());
  for (std::size_t r = 0; r < H.n; ++r)
    for (std::size_t p = H.row_ptr[r]; p < H.row_ptr[r + 1]; ++p)
      t.emplace_back(static_cast<int>(r), static_cast<int>(H.col[p]), H.val[p]);
  Eigen::SparseMatrix<cplx> A(static_cast<Eigen::Index>(H.n), static_cast<Eigen::Index>(H.n));
  A.setFromTriplets(t.begin(), t.end());
  return A;
}

// Replaces transformed Ritz values by eigenvalues of H with residuals measured on H.
SpectrumResult back_transform(const SparseHermitian& H, double sigma, SpectrumResult r,
                              std::size_t k, double tol, bool want_vectors) {
  SpectrumResult out;
  out.iterations = r.iterations;
  out.seed = r.seed;
  out.shift = sigma;
  std::vector<std::size_t> idx(r.eigenvalues.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> E(idx.size()), res(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto [e, rr] = rayleigh_refine(H, r.eigenvectors[i]);
    E[i] = e;
    res[i] = rr;
  }
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return E[a] < E[b]; });
  bool ok = true;
  for (std::size_t i = 0; i < std::min(k, idx.size()); ++i) {
    out.eigenvalues.push_back(E[idx[i]]);
    out.residual_norms.push_back(res[idx[i]]);
    ok = ok && res[idx[i]] <= tol;
    if (want_vectors) out.eigenvectors.push_back(std::move(r.eigenvectors[idx[i]]));
  }
  out.converged = ok && out.eigenvalues.size() == k;
  return out;
}

template <class Factor>
SpectrumResult transformed_solve(const SparseHermitian& H, const Factor& factor, double sigma,
                                 const LanczosOptions& options, Target target) {
  // H x - E x = -(H - sigma) r / theta for a Ritz pair (theta, x) of (H - sigma)^{-1} with
  // residual r; for r dominated by the spectrum near sigma this is |r| / theta^2.
  const std::size_t n = H.n;
  LinearOperator op{n, [&factor, n](const cplx* x, cplx* y) {
                      Eigen::Map<const CVec> xv(x, static_cast<Eigen::Index>(n));
                      Eigen::Map<CVec> yv(y, static_cast<Eigen::Index>(n));
                      yv = factor.solve(xv);
                    }};
  LanczosOptions o = options;
  o.want_vectors = true;
  o.target = target;
  const auto scale = [](double theta) { return 1.0 / std::max(theta * theta, 1e-300); };
  const Verifier verify = [&H](const CVec& x, double) {
    return rayleigh_refine(H, std::vector<cplx>(x.data(), x.data() + x.size())).second;
  };
  return back_transform(H, sigma, run_lanczos(op, o, scale, verify), options.k, options.tol,
                        options.want_vectors);
}

}  // namespace

SpectrumResult lanczos(const LinearOperator& A, const LanczosOptions& options) {
  return run_lanczos(A, options, [](double) { return 1.0; });
}

SpectrumResult lowest_eigs(const SparseHermitian& H, const LanczosOptions& options) {
  LinearOperator op{H.n, [&H](const cplx* x, cplx* y) { H.multiply(x, y); }};
  LanczosOptions o = options;
  o.target = Target::Smallest;
  return lanczos(op, o);
}

SpectrumResult lowest_eigs(const SparseHermitian& H, std::size_t k, double tol,
                           std::size_t max_iter, std::uint64_t seed) {
  LanczosOptions o;
  o.k = k;
  o.tol = tol;
  o.max_iter = max_iter;
  o.seed = seed;
  return lowest_eigs(H, o);
}

SpectrumResult lowest_eigs_shift_invert(const SparseHermitian& H, double sigma,
                                        const LanczosOptions& options) {
  require(options.k < H.n, ErrorCode::DimensionTooSmall, "k must be smaller than the dimension");
  const Eigen::SparseMatrix<cplx> A = to_eigen(H);
  Eigen::SimplicialLLT<Eigen::SparseMatrix<cplx>, Eigen::Lower, Eigen::AMDOrdering<int>> llt;
  llt.analyzePattern(A);
  double step = std::max(1.0, std::abs(sigma)) * 0.05;
  for (int attempt = 0;; ++attempt) {
    llt.setShift(-sigma);
    llt.factorize(A);
    if (llt.info() == Eigen::Success) break;
    if (attempt >= 40) throw Error(ErrorCode::NoConvergence, "no definite shift found");
    sigma -= step;
    step *= 2.0;
  }
  return transformed_solve(H, llt, sigma, options, Target::Largest);
}

SpectrumResult eigs_near(const SparseHermitian& H, double sigma, const LanczosOptions& options) {
  require(options.k < H.n, ErrorCode::DimensionTooSmall, "k must be smaller than the dimension");
  const Eigen::SparseMatrix<cplx> A = to_eigen(H);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<cplx>, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
  ldlt.analyzePattern(A);
  ldlt.setShift(-sigma);
  ldlt.factorize(A);
  if (ldlt.info() != Eigen::Success) throw Error(ErrorCode::SolveFailed, "singular shifted matrix");
  return transformed_solve(H, ldlt, sigma, options, Target::LargestMagnitude);
}

std::size_t count_below(const SparseHermitian& H, double sigma) {
  const Eigen::SparseMatrix<cplx> A = to_eigen(H);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<cplx>, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
  ldlt.analyzePattern(A);
  ldlt.setShift(-sigma);
  ldlt.factorize(A);
  if (ldlt.info() != Eigen::Success) throw Error(ErrorCode::SolveFailed, "singular shifted matrix");
  const auto D = ldlt.vectorD();
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < D.size(); ++i) count += std::real(D(i)) < 0.0;
  return count;
}

std::pair<double, double> rayleigh_refine(const SparseHermitian& H, const std::vector<cplx>& v) {
  require(v.size() == H.n, ErrorCode::GridMismatch, "vector length does not match matrix");
  double nrm = 0.0;
  for (const cplx& z : v) nrm += std::norm(z);
  require(nrm > 0.0, ErrorCode::ZeroVector, "zero vector");
  const std::vector<cplx> hv = H * v;
  double num = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i)
    num += v[i].real() * hv[i].real() + v[i].imag() * hv[i].imag();
  const double E = num / nrm;
  double r = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) r += std::norm(hv[i] - E * v[i]);
  return {E, std::sqrt(r / nrm)};
}

}  // namespace magspec
