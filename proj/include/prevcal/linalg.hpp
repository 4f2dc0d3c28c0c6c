#ifndef PREVCAL_LINALG_HPP
#define PREVCAL_LINALG_HPP

#include "prevcal/types.hpp"

namespace prevcal {

// Small dense symmetric positive-definite kit for the regression updates.
// Dimensions here are the number of regression terms, so O(D^3) is nothing.

// Lower Cholesky factor of a symmetric positive-definite matrix; throws
// InvalidStateError when the matrix is not PD.
Mat cholesky_lower(const Mat& a);

// Solve L y = b (forward substitution).
Vec forward_solve(const Mat& l, const Vec& b);

// Solve L' x = y (back substitution against the transposed factor).
Vec backward_solve_t(const Mat& l, const Vec& y);

// Solve (L L') x = b.
Vec cholesky_solve(const Mat& l, const Vec& b);

// Inverse via Cholesky; used once per run to invert prior covariances.
Mat spd_inverse(const Mat& a);

}  // namespace prevcal

#endif
