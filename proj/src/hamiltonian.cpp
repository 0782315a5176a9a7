#include "magspec/hamiltonian.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

namespace magspec {

std::string_view to_string(DiscretizationScheme s) {
  return s == DiscretizationScheme::Peierls ? "Peierls" : "DirectCentral";
}

std::string_view to_string(DeltaScheme s) {
  return s == DeltaScheme::NodeBump ? "NodeBump" : "LatticeMatched";
}

namespace {

void check_inputs(const ModelParams& params, const Grid2D& grid, const AssemblyOptions& options) {
  ModelParams checked = params;
  if (!options.enforce_sign) checked.lambda = -std::abs(params.lambda);
  if (options.allow_zero_omega && params.omega == 0.0) checked.omega = 1.0;
  validate_params(checked);
  require(grid.nx >= 3 && grid.ny >= 3 && grid.hx > 0.0 && grid.hy > 0.0, ErrorCode::InvalidGrid,
          "grid too small");
  require(grid.size() < (std::size_t{1} << 31), ErrorCode::InvalidGrid, "grid too large");
  if (params.kind == ModelKind::DeltaLine && params.lambda != 0.0 && grid.spans_x_zero())
    require(grid.x_zero_node().has_value(), ErrorCode::GridMisaligned,
            "the line x = 0 crosses the domain but is not a node column");
}

// Coupling contribution at node (i, j): point interaction on x = 0 or the smooth potential.
struct CouplingTerm {
  const ModelParams& params;
  const Grid2D& grid;
  DeltaScheme delta;
  std::optional<std::size_t> zero_column;

  double operator()(std::size_t i, double x, double y) const {
    if (params.lambda == 0.0) return 0.0;
    if (params.kind == ModelKind::DeltaLine)
      return (zero_column && i == *zero_column) ? delta_diagonal(params.lambda * y, grid.hx, delta)
                                                : 0.0;
    return params.lambda * y * y * (*params.potential)(x * y);
  }
};

}  // namespace

SparseHermitian assemble(const ModelParams& params, const Grid2D& grid,
                         const AssemblyOptions& options) {
  check_inputs(params, grid, options);
  const bool neumann = grid.bc == BoundaryCondition::Neumann;
  const std::size_t nx = grid.nx, ny = grid.ny;
  const double ihx2 = 1.0 / (grid.hx * grid.hx), ihy2 = 1.0 / (grid.hy * grid.hy);
  const double B = params.b_field, w2 = params.omega * params.omega;
  const bool peierls = options.scheme == DiscretizationScheme::Peierls;
  const CouplingTerm coupling{params, grid, options.delta, grid.x_zero_node()};

  SparseHermitian H;
  H.n = grid.size();
  H.row_ptr.reserve(H.n + 1);
  H.col.reserve(5 * H.n);
  H.val.reserve(5 * H.n);
  for (std::size_t j = 0; j < ny; ++j) {
    const double y = grid.y(j);
    cplx right, left;
    double scalar;
    if (peierls) {
      const double theta = B * y * grid.hx;
      right = -cplx(std::cos(theta), std::sin(theta)) * ihx2;
      left = std::conj(right);
      scalar = w2 * y * y;
    } else {
      right = cplx(-ihx2, -B * y / grid.hx);
      left = std::conj(right);
      scalar = (w2 + B * B) * y * y;
    }
    for (std::size_t i = 0; i < nx; ++i) {
      const std::size_t idx = grid.index(i, j);
      double kinetic = 2.0 * ihx2 + 2.0 * ihy2;
      if (neumann) {
        kinetic = ((i > 0) + (i + 1 < nx)) * ihx2 + ((j > 0) + (j + 1 < ny)) * ihy2;
      }
      if (j > 0) H.push(idx - nx, cplx(-ihy2, 0.0));
      if (i > 0) H.push(idx - 1, left);
      H.push(idx, cplx(kinetic + scalar + coupling(i, grid.x(i), y), 0.0));
      if (i + 1 < nx) H.push(idx + 1, right);
      if (j + 1 < ny) H.push(idx + nx, cplx(-ihy2, 0.0));
      H.end_row();
    }
  }
  return H;
}

SparseHermitian assemble(const ModelParams& params, const Grid2D& grid,
                         DiscretizationScheme scheme) {
  AssemblyOptions o;
  o.scheme = scheme;
  return assemble(params, grid, o);
}

SparseSymmetric assemble_nonmagnetic_tilde(const ModelParams& params, const Grid2D& grid,
                                           DeltaScheme delta) {
  check_inputs(params, grid, AssemblyOptions{});
  const bool neumann = grid.bc == BoundaryCondition::Neumann;
  const std::size_t nx = grid.nx, ny = grid.ny;
  const double ihx2 = 1.0 / (grid.hx * grid.hx), ihy2 = 1.0 / (grid.hy * grid.hy);
  const double a2 = params.omega * params.omega + params.b_field * params.b_field;
  const CouplingTerm coupling{params, grid, delta, grid.x_zero_node()};

  SparseSymmetric S;
  S.n = grid.size();
  S.col.reserve(5 * S.n);
  S.val.reserve(5 * S.n);
  for (std::size_t j = 0; j < ny; ++j) {
    const double y = grid.y(j);
    const double scalar = a2 * y * y;
    for (std::size_t i = 0; i < nx; ++i) {
      const std::size_t idx = grid.index(i, j);
      double kinetic = 2.0 * ihx2 + 2.0 * ihy2;
      if (neumann) kinetic = ((i > 0) + (i + 1 < nx)) * ihx2 + ((j > 0) + (j + 1 < ny)) * ihy2;
      if (j > 0) S.push(idx - nx, -ihy2);
      if (i > 0) S.push(idx - 1, -ihx2);
      S.push(idx, kinetic + scalar + coupling(i, grid.x(i), y));
      if (i + 1 < nx) S.push(idx + 1, -ihx2);
      if (j + 1 < ny) S.push(idx + nx, -ihy2);
      S.end_row();
    }
  }
  return S;
}

SparseHermitian to_hermitian(const SparseSymmetric& S) {
  SparseHermitian H;
  H.n = S.n;
  H.row_ptr = S.row_ptr;
  H.col = S.col;
  H.val.assign(S.val.begin(), S.val.end());
  return H;
}

double form_value(const SparseHermitian& H, const std::vector<cplx>& u) {
  require(u.size() == H.n, ErrorCode::GridMismatch, "vector length does not match matrix");
  double nrm = 0.0;
  for (const cplx& z : u) nrm += std::norm(z);
  require(nrm > 0.0, ErrorCode::ZeroVector, "zero vector");
  const std::vector<cplx> hu = H * u;
  double num = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i)
    num += u[i].real() * hu[i].real() + u[i].imag() * hu[i].imag();
  return num / nrm;
}

double form_value(const SparseSymmetric& S, const std::vector<double>& u) {
  require(u.size() == S.n, ErrorCode::GridMismatch, "vector length does not match matrix");
  double nrm = 0.0;
  for (double z : u) nrm += z * z;
  require(nrm > 0.0, ErrorCode::ZeroVector, "zero vector");
  const std::vector<double> su = S * u;
  double num = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) num += u[i] * su[i];
  return num / nrm;
}

double hermiticity_defect(const SparseHermitian& H) {
  double d = 0.0;
  for (std::size_t r = 0; r < H.n; ++r)
    for (std::size_t p = H.row_ptr[r]; p < H.row_ptr[r + 1]; ++p)
      d = std::max(d, std::abs(H.val[p] - std::conj(H.at(H.col[p], r))));
  return d;
}

std::vector<std::size_t> mirror_permutation(const Grid2D& grid) {
  std::vector<std::size_t> p(grid.size());
  for (std::size_t j = 0; j < grid.ny; ++j)
    for (std::size_t i = 0; i < grid.nx; ++i)
      p[grid.index(i, j)] = grid.index(grid.nx - 1 - i, grid.ny - 1 - j);
  return p;
}

void write_matrix_market(const std::filesystem::path& path, const SparseHermitian& H) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::IoError, "cannot write " + path.string());
  std::size_t lower = 0;
  for (std::size_t r = 0; r < H.n; ++r)
    for (std::size_t p = H.row_ptr[r]; p < H.row_ptr[r + 1]; ++p) lower += H.col[p] <= r;
  out << "%%MatrixMarket matrix coordinate complex hermitian\n";
  out << H.n << ' ' << H.n << ' ' << lower << '\n';
  out << std::setprecision(17);
  for (std::size_t r = 0; r < H.n; ++r)
    for (std::size_t p = H.row_ptr[r]; p < H.row_ptr[r + 1]; ++p)
      if (H.col[p] <= r)
        out << r + 1 << ' ' << H.col[p] + 1 << ' ' << H.val[p].real() << ' ' << H.val[p].imag()
            << '\n';
}

}  // namespace magspec
