#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace magspec {

using cplx = std::complex<double>;

/// Compressed-row sparse matrix; columns within a row are sorted ascending.
template <class T>
struct CsrMatrix {
  std::size_t n = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::uint32_t> col;
  std::vector<T> val;

  std::size_t nnz() const { return val.size(); }

  void push(std::size_t c, T v) {
    col.push_back(static_cast<std::uint32_t>(c));
    val.push_back(v);
  }
  void end_row() { row_ptr.push_back(val.size()); }

  T at(std::size_t r, std::size_t c) const {
    for (std::size_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p)
      if (col[p] == c) return val[p];
    return T{};
  }

  void multiply(const T* x, T* y) const;

  std::vector<T> operator*(const std::vector<T>& x) const {
    std::vector<T> y(n);
    multiply(x.data(), y.data());
    return y;
  }
};

using SparseHermitian = CsrMatrix<cplx>;
using SparseSymmetric = CsrMatrix<double>;

template <>
inline void CsrMatrix<double>::multiply(const double* x, double* y) const {
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p) s += val[p] * x[col[p]];
    y[r] = s;
  }
}

template <>
inline void CsrMatrix<cplx>::multiply(const cplx* x, cplx* y) const {
  const double* xr = reinterpret_cast<const double*>(x);
  const double* vr = reinterpret_cast<const double*>(val.data());
  for (std::size_t r = 0; r < n; ++r) {
    double re = 0.0, im = 0.0;
    for (std::size_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p) {
      const double a = vr[2 * p], b = vr[2 * p + 1];
      const double c = xr[2 * col[p]], d = xr[2 * col[p] + 1];
      re += a * c - b * d;
      im += a * d + b * c;
    }
    y[r] = cplx(re, im);
  }
}

}  // namespace magspec
