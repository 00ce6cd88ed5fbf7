#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>
#include <cmath>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "rng.hpp"

// Orthogonal-group constructions: completions, the rotation carrying one
// vector onto another, principal logs of special orthogonal matrices, PSD
// square roots, and the norm/spectrum-preserving paths built from them.

namespace spanreg {

inline constexpr double kOrthTol = 1e-10;

// Extend the orthonormal columns of B (d x k, k < d) to a full orthonormal
// basis; returns the d x (d-k) complement. Deterministic for a fixed seed:
// candidate directions come from the seeded generator and are orthogonalized
// by repeated modified Gram-Schmidt.
inline Matrix orthonormal_completion(const Matrix& B, std::uint64_t seed = 0) {
  const Index d = B.rows();
  const Index k = B.cols();
  if (k > 0) {
    const double dev = (B.transpose() * B - Matrix::Identity(k, k)).norm();
    if (dev > kOrthTol * std::max<double>(1, k)) {
      throw NotOrthonormalInput("orthonormal_completion: columns not orthonormal");
    }
  }
  if (k >= d) return Matrix(d, 0);
  Matrix C(d, d - k);
  Rng rng(seed ^ 0xC0F7E7A1u);
  Index got = 0;
  int attempts = 0;
  while (got < d - k) {
    if (++attempts > 200 * static_cast<int>(d)) {
      throw Error("orthonormal_completion: degenerate candidates");  // unreachable in practice
    }
    Vector v = rng.normal_vector(d);
    for (int pass = 0; pass < 2; ++pass) {
      for (Index j = 0; j < k; ++j) v -= B.col(j).dot(v) * B.col(j);
      for (Index j = 0; j < got; ++j) v -= C.col(j).dot(v) * C.col(j);
    }
    const double n = v.norm();
    if (n < 1e-6) continue;
    C.col(got++) = v / n;
  }
  return C;
}

// Haar-ish random rotation: QR of a Gaussian matrix with the sign convention
// that makes the factorization unique, then a final column flip onto SO(d).
inline Matrix random_special_orthogonal(Index d, Rng& rng) {
  if (d < 1) throw DimsTooSmall("random_special_orthogonal: d < 1");
  const Matrix G = rng.normal_matrix(d, d);
  Eigen::HouseholderQR<Matrix> qr(G);
  Matrix Q = qr.householderQ();
  const Matrix R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < d; ++j)
    if (R(j, j) < 0) Q.col(j) = -Q.col(j);
  if (Q.determinant() < 0) Q.col(d - 1) = -Q.col(d - 1);
  return Q;
}

/**
 * Rotation U in SO(d) with U w = v, for ||w|| = ||v||, d >= 2. Built from two
 * orthonormal frames: R completes w/||w||, S completes v/||v||, and
 * U = S R^T maps the first frame onto the second; a sign flip of the last
 * completion column fixes det(U) = +1. For w = v any U fixing w is accepted.
 */
inline Matrix rotation_between(const Vector& w, const Vector& v) {
  const Index d = w.size();
  if (v.size() != d) throw DimensionMismatch("rotation_between: sizes differ");
  if (d < 2) throw DimsTooSmall("rotation_between: d < 2");
  const double nw = w.norm();
  const double nv = v.norm();
  if (nw < 1e-14 || nv < 1e-14) throw ZeroVector("rotation_between: zero vector");
  if (std::abs(nw - nv) > 1e-10 * std::max(1.0, nw)) {
    throw NormMismatch("rotation_between: norms differ");
  }
  const Vector wb = w / nw;
  const Vector vb = v / nv;
  Matrix R(d, d), S(d, d);
  R.col(0) = wb;
  R.rightCols(d - 1) = orthonormal_completion(wb, 11);
  S.col(0) = vb;
  S.rightCols(d - 1) = orthonormal_completion(vb, 23);
  if ((S * R.transpose()).determinant() < 0) S.col(d - 1) = -S.col(d - 1);
  return S * R.transpose();
}

// Scaling-and-squaring matrix exponential (Eigen's Pade implementation).
inline Matrix exp_skew(const Matrix& D) {
  if (D.rows() != D.cols()) throw DimensionMismatch("exp_skew: not square");
  return D.exp();
}

/**
 * Principal log of U in SO(d): the skew-symmetric D with exp(D) = U whose
 * rotation angles lie in (-pi, pi]. Real Schur form reduces U to 2x2 rotation
 * blocks and +-1 eigenvalues; -1 eigenvalues come in pairs (det = +1) and
 * each pair contributes a rotation by pi in its invariant plane.
 */
inline Matrix so_log(const Matrix& U) {
  const Index d = U.rows();
  if (U.cols() != d) throw DimensionMismatch("so_log: not square");
  if ((U.transpose() * U - Matrix::Identity(d, d)).norm() > 1e-8 * std::max<double>(1, d)) {
    throw NotSpecialOrthogonal("so_log: not orthogonal");
  }
  if (U.determinant() < 0) throw NotSpecialOrthogonal("so_log: det = -1");
  Eigen::RealSchur<Matrix> schur(U);
  const Matrix& T = schur.matrixT();
  const Matrix& Q = schur.matrixU();
  Matrix D = Matrix::Zero(d, d);
  std::vector<Index> minus_ones;
  Index i = 0;
  while (i < d) {
    if (i + 1 < d && std::abs(T(i + 1, i)) > 1e-10) {
      // 2x2 block: in the plane of Schur vectors (q1, q2) the action is a
      // rotation by theta.
      const double c = 0.5 * (T(i, i) + T(i + 1, i + 1));
      const double s = 0.5 * (T(i + 1, i) - T(i, i + 1));
      const double theta = std::atan2(s, c);
      const Vector q1 = Q.col(i);
      const Vector q2 = Q.col(i + 1);
      D += theta * (q2 * q1.transpose() - q1 * q2.transpose());
      i += 2;
    } else {
      if (T(i, i) < 0) minus_ones.push_back(i);
      i += 1;
    }
  }
  if (minus_ones.size() % 2 != 0) {
    throw NotSpecialOrthogonal("so_log: odd count of -1 eigenvalues");
  }
  constexpr double pi = 3.14159265358979323846;
  for (std::size_t j = 0; j + 1 < minus_ones.size(); j += 2) {
    const Vector qa = Q.col(minus_ones[j]);
    const Vector qb = Q.col(minus_ones[j + 1]);
    D += pi * (qb * qa.transpose() - qa * qb.transpose());
  }
  return D;
}

// Symmetric PSD square root by eigendecomposition; eigenvalues in
// [-tol, 0) are clamped to zero, below -tol is an error.
inline Matrix psd_sqrt(const Matrix& A, double tol = 1e-10) {
  if (A.rows() != A.cols()) throw DimensionMismatch("psd_sqrt: not square");
  const Matrix S = 0.5 * (A + A.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  const Vector& lam = es.eigenvalues();
  const double scale = std::max(1.0, lam.size() ? std::abs(lam[lam.size() - 1]) : 1.0);
  Vector r(lam.size());
  for (Index i = 0; i < lam.size(); ++i) {
    if (lam[i] < -tol * scale) throw NotPsd("psd_sqrt: eigenvalue below -tolerance");
    r[i] = std::sqrt(std::max(0.0, lam[i]));
  }
  return es.eigenvectors() * r.asDiagonal() * es.eigenvectors().transpose();
}

/**
 * Constant-norm path z(lambda) = ||w|| exp(lambda D) w0 with exp(D) the
 * rotation carrying the unit w0 onto w/||w||: z(0) = ||w|| w0, z(1) = w, and
 * <z(lambda), z(lambda)> = <w, w> along the whole path.
 */
struct VectorPath {
  double norm;
  Vector w0;
  Matrix D;

  Vector at(double lambda) const { return norm * (exp_skew(lambda * D) * w0); }
};

inline VectorPath make_vector_path(const Vector& w, const Vector& w0) {
  if (w0.size() != w.size()) throw DimensionMismatch("make_vector_path: sizes differ");
  if (w.size() < 2) throw DimsTooSmall("make_vector_path: d < 2");
  if (std::abs(w0.norm() - 1.0) > kOrthTol) {
    throw NotOrthonormalInput("make_vector_path: w0 not unit");
  }
  const double nw = w.norm();
  if (nw < 1e-14) throw ZeroVector("make_vector_path: w = 0");
  const Matrix U = rotation_between(w0, w / nw);
  return VectorPath{nw, w0, so_log(U)};
}

/**
 * Spectrum-preserving path for W with SVD sum_i sigma_i u_i v_i^T (rank r):
 *   Z(lambda) = sigma_1 R exp(lambda D) e_1 v_1^T + sum_{i>=2} sigma_i u_i v_i^T
 * where R = [u_1, u_{r+1}, ..., u_d] spans the directions available to the
 * leading left singular vector and exp(D) rotates e_1 onto the coordinates of
 * the unit target z (which must be orthogonal to u_2..u_r). Z(0) = W,
 * Z(1) has leading left singular vector z, and sigma(Z(lambda)) is constant.
 */
struct MatrixPath {
  double sigma1;
  Matrix R;      // d x k frame, k = d - r + 1
  Matrix D;      // k x k skew generator
  Vector v1;     // first right singular vector
  Matrix rest;   // sum_{i>=2} sigma_i u_i v_i^T

  Matrix at(double lambda) const {
    const Vector u = R * (exp_skew(lambda * D).col(0));
    return sigma1 * u * v1.transpose() + rest;
  }
};

inline MatrixPath make_matrix_path(const Matrix& W, const Vector& z) {
  const Index d = W.rows();
  const Index n = W.cols();
  if (z.size() != d) throw DimensionMismatch("make_matrix_path: z size != rows");
  if (std::abs(z.norm() - 1.0) > kOrthTol) {
    throw NotOrthonormalInput("make_matrix_path: z not unit");
  }
  Eigen::JacobiSVD<Matrix> svd(W, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  const Index r = rank_from_singular_values(sv);
  if (r == 0) throw RankZero("make_matrix_path: W has rank 0");
  const Matrix& U = svd.matrixU();
  for (Index i = 1; i < r; ++i) {
    if (std::abs(U.col(i).dot(z)) > 1e-9) {
      throw NotOrthogonalToFrame("make_matrix_path: z overlaps u_2..u_r");
    }
  }
  const Index k = d - r + 1;
  if (k < 2) throw DimsTooSmall("make_matrix_path: need d > rank");
  Matrix R(d, k);
  R.col(0) = U.col(0);
  for (Index i = r; i < d; ++i) R.col(i - r + 1) = U.col(i);
  Vector q = R.transpose() * z;
  if (std::abs(q.norm() - 1.0) > 1e-9) {
    throw NotOrthogonalToFrame("make_matrix_path: z leaves the admissible frame");
  }
  q /= q.norm();
  Matrix Qrot(k, k);
  Qrot.col(0) = q;
  Qrot.rightCols(k - 1) = orthonormal_completion(q, 37);
  if (Qrot.determinant() < 0) Qrot.col(k - 1) = -Qrot.col(k - 1);
  Matrix rest = Matrix::Zero(d, n);
  for (Index i = 1; i < r; ++i) {
    rest += sv[i] * U.col(i) * svd.matrixV().col(i).transpose();
  }
  return MatrixPath{sv[0], R, so_log(Qrot), svd.matrixV().col(0), rest};
}

// Trace norm (sum of singular values).
inline double trace_norm_of(const Matrix& W) { return singular_values(W).sum(); }

struct TraceNormComparison {
  double before;  // ||W||_1
  double after;   // ||W + P||_1
  bool holds;     // after >= before - 1e-9
};

// Compares ||W||_1 against ||W + P||_1 for a column-orthogonal increment;
// requires ||W^T P|| <= 1e-9 (||W|| ||P|| + 1).
inline TraceNormComparison tracenorm_orthogonal_add(const Matrix& W, const Matrix& P) {
  if (W.rows() != P.rows() || W.cols() != P.cols()) {
    throw DimensionMismatch("tracenorm_orthogonal_add: shapes differ");
  }
  const double resid = (W.transpose() * P).norm();
  if (resid > 1e-9 * (W.norm() * P.norm() + 1.0)) {
    throw NotOrthogonal("tracenorm_orthogonal_add: W^T P != 0");
  }
  const double before = trace_norm_of(W);
  const double after = trace_norm_of(W + P);
  return TraceNormComparison{before, after, after >= before - 1e-9};
}

}  // namespace spanreg
