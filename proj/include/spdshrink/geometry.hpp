#pragma once

#include <vector>

#include <Eigen/Dense>

// Log-Euclidean operations on symmetric positive definite (SPD) matrices.
//
// Conventions used throughout the library:
//  - Matrices are dense, double precision, and treated as symmetric; inputs
//    are symmetrized as (A + A^T)/2 before any eigendecomposition.
//  - SPD checks use a relative floor: an eigenvalue is acceptable when it
//    exceeds 1e-12 * max(|lambda|_max, 1).
//  - The half-vectorization ve() lists the diagonal first (index order), then
//    the strict upper triangle row by row scaled by sqrt(2), so that
//    ||ve(A) - ve(B)|| equals the Frobenius distance of the symmetric parts.

namespace spdshrink {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Largest eigenvalue of a matrix log for which exp() stays finite in double.
inline constexpr double kExpCap = 700.0;

// Relative SPD tolerance given the largest-magnitude eigenvalue.
inline double spd_eps(double max_abs_eig) {
  return 1e-12 * (max_abs_eig > 1.0 ? max_abs_eig : 1.0);
}

// (A + A^T) / 2.  Throws DimMismatch for non-square input.
Matrix symmetrize(const Matrix& a);

// Dimension of ve() output for an N x N symmetric matrix: N(N+1)/2.
int vec_dim(int n);
// Inverse of vec_dim; throws BadLength when q is not of the form N(N+1)/2.
int mat_dim(int q);

// Matrix logarithm of an SPD matrix (throws NotSpd otherwise).
Matrix sym_log(const Matrix& x);

// Matrix exponential of a symmetric matrix; throws Overflow when any
// eigenvalue exceeds kExpCap.
Matrix sym_exp(const Matrix& y);

// Isometric half-vectorization of a symmetric matrix and its inverse.
Vector ve(const Matrix& y);
Matrix ve_inv(const Vector& v);

// Log-Euclidean distance ||log X - log Y||_F between SPD matrices.
double dist_le(const Matrix& x, const Matrix& y);

// Log-Euclidean (Frechet) mean exp(mean of logs).  Throws EmptyInput for an
// empty list and DimMismatch when dimensions disagree.
Matrix frechet_mean_le(const std::vector<Matrix>& xs);

// SPD inverse via Cholesky (throws NotSpd when factorization fails).  Shared
// helper so sampler identities hold bit-exactly.
Matrix inv_spd(const Matrix& a);

// Validation helper: throws NotSpd (with `what` in the message) unless a is
// square, symmetric to tolerance, and positive definite per spd_eps.
void require_spd(const Matrix& a, const char* what);

}  // namespace spdshrink
