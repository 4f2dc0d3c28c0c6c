#include "prevcal/linalg.hpp"

#include <cmath>

#include "prevcal/errors.hpp"

namespace prevcal {

Mat cholesky_lower(const Mat& a) {
  if (a.rows != a.cols || a.rows == 0) {
    throw ShapeError("cholesky: matrix must be square");
  }
  const std::size_t n = a.rows;
  Mat l(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) {
        s -= l(i, k) * l(j, k);
      }
      if (i == j) {
        if (!(s > 0.0)) {
          throw InvalidStateError(
              "cholesky: matrix is not positive definite");
        }
        l(i, i) = std::sqrt(s);
      } else {
        l(i, j) = s / l(j, j);
      }
    }
  }
  return l;
}

Vec forward_solve(const Mat& l, const Vec& b) {
  const std::size_t n = l.rows;
  Vec y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
    y[i] = s / l(i, i);
  }
  return y;
}

Vec backward_solve_t(const Mat& l, const Vec& y) {
  const std::size_t n = l.rows;
  Vec x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x[k];
    x[ii] = s / l(ii, ii);
  }
  return x;
}

Vec cholesky_solve(const Mat& l, const Vec& b) {
  return backward_solve_t(l, forward_solve(l, b));
}

Mat spd_inverse(const Mat& a) {
  const Mat l = cholesky_lower(a);
  const std::size_t n = a.rows;
  Mat inv(n, n, 0.0);
  Vec e(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    e.assign(n, 0.0);
    e[j] = 1.0;
    const Vec col = cholesky_solve(l, e);
    for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
  }
  return inv;
}

}  // namespace prevcal
