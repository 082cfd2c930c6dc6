#include "spdshrink/geometry.hpp"

#include <cmath>

#include "spdshrink/errors.hpp"

namespace spdshrink {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

// Eigendecomposition of the symmetric part of a, with SPD / cap checks left
// to the callers.
Eigen::SelfAdjointEigenSolver<Matrix> sym_eig(const Matrix& a,
                                              const char* what) {
  const Matrix s = symmetrize(a);
  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  require(es.info() == Eigen::Success, Err::NotSpd,
          std::string(what) + ": eigendecomposition failed");
  return es;
}

}  // namespace

Matrix symmetrize(const Matrix& a) {
  require(a.rows() == a.cols(), Err::DimMismatch,
          "symmetrize: matrix must be square");
  return 0.5 * (a + a.transpose());
}

int vec_dim(int n) {
  require(n >= 1, Err::DimMismatch, "vec_dim: dimension must be positive");
  return n * (n + 1) / 2;
}

int mat_dim(int q) {
  require(q >= 1, Err::BadLength, "mat_dim: length must be positive");
  const int n = static_cast<int>(std::floor((std::sqrt(8.0 * q + 1.0) - 1.0) / 2.0));
  require(n >= 1 && n * (n + 1) / 2 == q, Err::BadLength,
          "mat_dim: length is not a triangular number N(N+1)/2");
  return n;
}

Matrix sym_log(const Matrix& x) {
  const auto es = sym_eig(x, "sym_log");
  const Vector& ev = es.eigenvalues();
  const double max_abs = ev.cwiseAbs().maxCoeff();
  require(ev.minCoeff() > spd_eps(max_abs), Err::NotSpd,
          "sym_log: matrix is not positive definite");
  const Vector logged = ev.array().log().matrix();
  return symmetrize(es.eigenvectors() * logged.asDiagonal() *
                    es.eigenvectors().transpose());
}

Matrix sym_exp(const Matrix& y) {
  const auto es = sym_eig(y, "sym_exp");
  const Vector& ev = es.eigenvalues();
  require(ev.maxCoeff() <= kExpCap, Err::Overflow,
          "sym_exp: eigenvalue exceeds exponential overflow cap");
  const Vector exped = ev.array().exp().matrix();
  return symmetrize(es.eigenvectors() * exped.asDiagonal() *
                    es.eigenvectors().transpose());
}

Vector ve(const Matrix& y) {
  const Matrix s = symmetrize(y);
  const int n = static_cast<int>(s.rows());
  Vector v(vec_dim(n));
  for (int i = 0; i < n; ++i) v[i] = s(i, i);
  int pos = n;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) v[pos++] = kSqrt2 * s(i, j);
  }
  return v;
}

Matrix ve_inv(const Vector& v) {
  const int q = static_cast<int>(v.size());
  const int n = mat_dim(q);
  Matrix y(n, n);
  for (int i = 0; i < n; ++i) y(i, i) = v[i];
  int pos = n;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double value = v[pos++] / kSqrt2;
      y(i, j) = value;
      y(j, i) = value;
    }
  }
  return y;
}

double dist_le(const Matrix& x, const Matrix& y) {
  require(x.rows() == y.rows() && x.cols() == y.cols(), Err::DimMismatch,
          "dist_le: dimensions disagree");
  return (sym_log(x) - sym_log(y)).norm();
}

Matrix frechet_mean_le(const std::vector<Matrix>& xs) {
  require(!xs.empty(), Err::EmptyInput, "frechet_mean_le: no matrices given");
  Matrix acc = sym_log(xs.front());
  for (std::size_t i = 1; i < xs.size(); ++i) {
    const Matrix& x = xs[i];
    require(x.rows() == acc.rows() && x.cols() == acc.cols(),
            Err::DimMismatch, "frechet_mean_le: dimensions disagree");
    acc += sym_log(x);
  }
  acc /= static_cast<double>(xs.size());
  return sym_exp(acc);
}

Matrix inv_spd(const Matrix& a) {
  const Matrix s = symmetrize(a);
  Eigen::LLT<Matrix> llt(s);
  require(llt.info() == Eigen::Success, Err::NotSpd,
          "inv_spd: Cholesky factorization failed");
  return llt.solve(Matrix::Identity(s.rows(), s.cols()));
}

void require_spd(const Matrix& a, const char* what) {
  require(a.rows() == a.cols(), Err::NotSpd,
          std::string(what) + ": matrix must be square");
  const auto es = sym_eig(a, what);
  const Vector& ev = es.eigenvalues();
  const double max_abs = ev.cwiseAbs().maxCoeff();
  require(ev.minCoeff() > spd_eps(max_abs), Err::NotSpd,
          std::string(what) + ": matrix is not positive definite");
}

}  // namespace spdshrink
