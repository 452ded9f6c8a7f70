#pragma once

// Small dense matrices over a generic scalar (double or Dual<...>).
// Eigen is used for double-only work elsewhere; these kernels exist so the
// Gram solves can run on dual numbers.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "nhm/dual.hpp"

namespace nhm {

template <class S>
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, S(0.0)) {}

  static Mat identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = S(1.0);
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  S& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const S& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<const S> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  const std::vector<S>& data() const { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<S> data_;
};

using Matd = Mat<double>;
using Vec = std::vector<double>;

template <class S>
std::vector<S> mat_vec(const Mat<S>& a, std::span<const S> x) {
  std::vector<S> y(a.rows(), S(0.0));
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) y[i] += a(i, j) * x[j];
  return y;
}

template <class S>
S dot(std::span<const S> a, std::span<const S> b) {
  S s(0.0);
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Lower Cholesky factor; nullopt when the matrix is not numerically SPD.
template <class S>
std::optional<Mat<S>> cholesky(const Mat<S>& a) {
  using std::sqrt;
  const std::size_t n = a.rows();
  Mat<S> l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    S diag = a(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    // pivots lost to cancellation relative to the original diagonal count as singular
    if (!(value_of(diag) > 1e-13 * std::abs(value_of(a(j, j)))) || !std::isfinite(value_of(diag))) return std::nullopt;
    S ljj = sqrt(diag);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      S s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

/// Solves L L^T x = b given the lower factor.
template <class S>
std::vector<S> cholesky_solve(const Mat<S>& l, std::span<const S> b) {
  const std::size_t n = l.rows();
  std::vector<S> y(b.begin(), b.end());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) y[i] -= l(i, k) * y[k];
    y[i] = y[i] / l(i, i);
  }
  for (std::size_t ii = n; ii-- > 0;) {
    for (std::size_t k = ii + 1; k < n; ++k) y[ii] -= l(k, ii) * y[k];
    y[ii] = y[ii] / l(ii, ii);
  }
  return y;
}

template <class S>
Mat<S> cholesky_inverse(const Mat<S>& l) {
  const std::size_t n = l.rows();
  Mat<S> inv(n, n);
  std::vector<S> e(n, S(0.0));
  for (std::size_t j = 0; j < n; ++j) {
    std::fill(e.begin(), e.end(), S(0.0));
    e[j] = S(1.0);
    auto col = cholesky_solve<S>(l, e);
    for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
  }
  return inv;
}

/// Gaussian elimination with partial pivoting; nullopt when singular.
template <class S>
std::optional<std::vector<S>> lu_solve(Mat<S> a, std::vector<S> b) {
  using std::abs;
  const std::size_t n = a.rows();
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) scale = std::max(scale, std::abs(value_of(a(i, j))));
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(value_of(a(r, c))) > std::abs(value_of(a(piv, c)))) piv = r;
    if (std::abs(value_of(a(piv, c))) <= 1e-14 * scale) return std::nullopt;
    if (piv != c) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(c, j), a(piv, j));
      std::swap(b[c], b[piv]);
    }
    for (std::size_t r = c + 1; r < n; ++r) {
      S f = a(r, c) / a(c, c);
      for (std::size_t j = c; j < n; ++j) a(r, j) -= f * a(c, j);
      b[r] -= f * b[c];
    }
  }
  std::vector<S> x(n, S(0.0));
  for (std::size_t ii = n; ii-- > 0;) {
    S s = b[ii];
    for (std::size_t j = ii + 1; j < n; ++j) s -= a(ii, j) * x[j];
    x[ii] = s / a(ii, ii);
  }
  return x;
}

inline double determinant(Matd a) {
  const std::size_t n = a.rows();
  double det = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a(r, c)) > std::abs(a(piv, c))) piv = r;
    if (a(piv, c) == 0.0) return 0.0;
    if (piv != c) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(c, j), a(piv, j));
      det = -det;
    }
    det *= a(c, c);
    for (std::size_t r = c + 1; r < n; ++r) {
      double f = a(r, c) / a(c, c);
      for (std::size_t j = c; j < n; ++j) a(r, j) -= f * a(c, j);
    }
  }
  return det;
}

/// Innermost values of a generic matrix.
template <class S>
Matd values(const Mat<S>& a) {
  Matd out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = value_of(a(i, j));
  return out;
}

}  // namespace nhm
