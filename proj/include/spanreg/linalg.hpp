#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "errors.hpp"

namespace spanreg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

// Singular values sigma > kRankRelTol * sigma_max count toward rank.
inline constexpr double kRankRelTol = 1e-10;
// Floor for norm denominators in relative residuals.
inline constexpr double kTinyNorm = 1e-30;

inline Eigen::JacobiSVD<Matrix> full_svd(const Matrix& A) {
  return Eigen::JacobiSVD<Matrix>(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
}

inline Vector singular_values(const Matrix& A) {
  return Eigen::JacobiSVD<Matrix>(A).singularValues();
}

inline Index rank_from_singular_values(const Vector& sv) {
  if (sv.size() == 0) return 0;
  const double cut = kRankRelTol * sv[0];
  Index r = 0;
  for (Index i = 0; i < sv.size(); ++i)
    if (sv[i] > cut) ++r;
  return r;
}

inline Index rank_of(const Matrix& A) {
  return rank_from_singular_values(singular_values(A));
}

// Orthonormal basis of the column span of A (d x r, r = numerical rank).
inline Matrix span_basis(const Matrix& A) {
  Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeThinU);
  const Index r = rank_from_singular_values(svd.singularValues());
  return svd.matrixU().leftCols(r);
}

// Orthonormal basis of the right null space of A (A * N = 0 column-wise).
// For A of size m x d the result is d x (d - rank).
inline Matrix null_basis(const Matrix& A) {
  Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeFullV);
  const Index r = rank_from_singular_values(svd.singularValues());
  return svd.matrixV().rightCols(A.cols() - r);
}

// Minimum-norm solution of X w = y via the SVD pseudoinverse with the
// relative rank cutoff above.
inline Vector min_norm_solution(const Matrix& X, const Vector& y) {
  if (X.rows() != y.size()) throw DimensionMismatch("min_norm_solution: X rows != y size");
  Eigen::JacobiSVD<Matrix> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const double cut = sv.size() ? kRankRelTol * sv[0] : 0.0;
  Vector t = svd.matrixU().transpose() * y;
  for (Index i = 0; i < sv.size(); ++i) t[i] = (sv[i] > cut) ? t[i] / sv[i] : 0.0;
  return svd.matrixV() * t;
}

// Projection of w onto the column span of the orthonormal basis Q.
inline Vector project_onto(const Matrix& Q, const Vector& w) { return Q * (Q.transpose() * w); }

inline Matrix project_columns_onto(const Matrix& Q, const Matrix& W) {
  return Q * (Q.transpose() * W);
}

// ||(I - Q Q^T) w|| / max(||w||, tiny) for an orthonormal basis Q.
inline double relative_off_span(const Matrix& Q, const Vector& w) {
  const double n = w.norm();
  return (w - project_onto(Q, w)).norm() / std::max(n, kTinyNorm);
}

inline bool approx_equal(double a, double b, double tol) { return std::abs(a - b) <= tol; }

}  // namespace spanreg
