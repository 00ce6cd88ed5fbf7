#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "rotations.hpp"

// Regularizer catalog. Vector penalties are functions of w in R^d, matrix
// penalties of W in R^{d x n} with one column per task. Evaluation follows
// the norm convention throughout: lp and Schatten families return
// (sum |.|^p)^(1/p), not the p-th power; p = 0 counts entries/singular
// values above the relative rank cutoff.

namespace spanreg {

// ---------------------------------------------------------------------------
// Vector regularizers
// ---------------------------------------------------------------------------

enum class VectorRegKind { squared_l2, h_of_norm, lp_norm };

// Scalar profile applied to <w, w> by h_of_norm.
enum class ScalarHKind { identity, sqrt_fn, square, exp_fn, affine };

struct VectorRegularizerSpec {
  VectorRegKind kind = VectorRegKind::squared_l2;
  ScalarHKind h = ScalarHKind::identity;
  double a = 1.0, b = 0.0;  // affine profile a*xi + b
  double p = 2.0;           // lp_norm exponent, p >= 0

  // Whether the spec's own structure promises an in-span minimizer:
  // h_of_norm with a nondecreasing profile, and lp only at p = 2.
  bool claimed_admissible() const {
    switch (kind) {
      case VectorRegKind::squared_l2:
        return true;
      case VectorRegKind::h_of_norm:
        return h != ScalarHKind::affine || a >= 0.0;
      case VectorRegKind::lp_norm:
        return p == 2.0;
    }
    return false;
  }

  std::string name() const;

  static VectorRegularizerSpec SquaredL2() { return {}; }
  static VectorRegularizerSpec HOfNorm(ScalarHKind hk, double a_ = 1.0, double b_ = 0.0) {
    VectorRegularizerSpec s;
    s.kind = VectorRegKind::h_of_norm;
    s.h = hk;
    s.a = a_;
    s.b = b_;
    return s;
  }
  static VectorRegularizerSpec Lp(double p_) {
    if (p_ < 0.0 || !std::isfinite(p_)) throw InvalidSpec("lp_norm: p must be finite and >= 0");
    VectorRegularizerSpec s;
    s.kind = VectorRegKind::lp_norm;
    s.p = p_;
    return s;
  }
};

inline std::string VectorRegularizerSpec::name() const {
  switch (kind) {
    case VectorRegKind::squared_l2:
      return "squared_l2";
    case VectorRegKind::h_of_norm:
      switch (h) {
        case ScalarHKind::identity:
          return "h_of_norm(identity)";
        case ScalarHKind::sqrt_fn:
          return "h_of_norm(sqrt)";
        case ScalarHKind::square:
          return "h_of_norm(square)";
        case ScalarHKind::exp_fn:
          return "h_of_norm(exp)";
        case ScalarHKind::affine:
          return "h_of_norm(affine " + std::to_string(a) + "," + std::to_string(b) + ")";
      }
      return "h_of_norm";
    case VectorRegKind::lp_norm:
      return "lp_norm(" + std::to_string(p) + ")";
  }
  return "?";
}

namespace detail {

inline double scalar_h_eval(ScalarHKind h, double a, double b, double xi) {
  switch (h) {
    case ScalarHKind::identity:
      return xi;
    case ScalarHKind::sqrt_fn:
      return std::sqrt(xi);
    case ScalarHKind::square:
      return xi * xi;
    case ScalarHKind::exp_fn:
      return std::exp(xi);
    case ScalarHKind::affine:
      return a * xi + b;
  }
  return 0.0;
}

inline double scalar_h_deriv(ScalarHKind h, double a, double xi) {
  switch (h) {
    case ScalarHKind::identity:
      return 1.0;
    case ScalarHKind::sqrt_fn:
      if (xi < 1e-300) throw NonDifferentiablePoint("h_of_norm(sqrt): xi = 0");
      return 0.5 / std::sqrt(xi);
    case ScalarHKind::square:
      return 2.0 * xi;
    case ScalarHKind::exp_fn:
      return std::exp(xi);
    case ScalarHKind::affine:
      return a;
  }
  return 0.0;
}

// (sum |v_i|^p)^(1/p) for p > 0; support count above the relative cutoff
// for p = 0. Entries are assumed nonnegative for the spectral callers.
inline double lp_combine(const Vector& v, double p) {
  if (p == 0.0) {
    const double vmax = v.cwiseAbs().maxCoeff();
    const double cut = kRankRelTol * vmax;
    double count = 0;
    for (Index i = 0; i < v.size(); ++i)
      if (std::abs(v[i]) > cut) count += 1;
    return count;
  }
  double s = 0;
  for (Index i = 0; i < v.size(); ++i) s += std::pow(std::abs(v[i]), p);
  if (s == 0.0) return 0.0;
  return std::pow(s, 1.0 / p);
}

}  // namespace detail

inline double eval(const VectorRegularizerSpec& reg, const Vector& w) {
  switch (reg.kind) {
    case VectorRegKind::squared_l2:
      return w.squaredNorm();
    case VectorRegKind::h_of_norm:
      return detail::scalar_h_eval(reg.h, reg.a, reg.b, w.squaredNorm());
    case VectorRegKind::lp_norm:
      return detail::lp_combine(w, reg.p);
  }
  return 0.0;
}

enum class GradientAvailability { analytic, none_at_point, nowhere };

inline GradientAvailability gradient_availability(const VectorRegularizerSpec& reg,
                                                  const Vector& w) {
  switch (reg.kind) {
    case VectorRegKind::squared_l2:
      return GradientAvailability::analytic;
    case VectorRegKind::h_of_norm:
      if (reg.h == ScalarHKind::sqrt_fn && w.squaredNorm() < 1e-300) {
        return GradientAvailability::none_at_point;
      }
      return GradientAvailability::analytic;
    case VectorRegKind::lp_norm: {
      if (reg.p == 0.0) return GradientAvailability::nowhere;
      if (reg.p <= 1.0) {
        const double cut = 1e-12 * std::max(1.0, w.cwiseAbs().maxCoeff());
        for (Index i = 0; i < w.size(); ++i)
          if (std::abs(w[i]) <= cut) return GradientAvailability::none_at_point;
        return GradientAvailability::analytic;
      }
      if (w.cwiseAbs().maxCoeff() < 1e-300) return GradientAvailability::none_at_point;
      return GradientAvailability::analytic;
    }
  }
  return GradientAvailability::nowhere;
}

inline Vector grad(const VectorRegularizerSpec& reg, const Vector& w) {
  switch (gradient_availability(reg, w)) {
    case GradientAvailability::nowhere:
      throw NotDifferentiableKind("grad: " + reg.name() + " has no gradient");
    case GradientAvailability::none_at_point:
      throw NonDifferentiablePoint("grad: " + reg.name() + " not differentiable here");
    case GradientAvailability::analytic:
      break;
  }
  switch (reg.kind) {
    case VectorRegKind::squared_l2:
      return 2.0 * w;
    case VectorRegKind::h_of_norm:
      return 2.0 * detail::scalar_h_deriv(reg.h, reg.a, w.squaredNorm()) * w;
    case VectorRegKind::lp_norm: {
      const double p = reg.p;
      double s = 0;
      for (Index i = 0; i < w.size(); ++i) s += std::pow(std::abs(w[i]), p);
      const double outer = std::pow(s, 1.0 / p - 1.0);
      Vector g(w.size());
      for (Index i = 0; i < w.size(); ++i) {
        const double aw = std::abs(w[i]);
        g[i] = (aw == 0.0) ? 0.0
                           : outer * std::pow(aw, p - 1.0) * (w[i] > 0 ? 1.0 : -1.0);
      }
      return g;
    }
  }
  return Vector::Zero(w.size());
}

// ---------------------------------------------------------------------------
// Matrix regularizers
// ---------------------------------------------------------------------------

enum class MatrixRegKind {
  frobenius,
  trace_norm,
  schatten,
  rank_kind,
  scaled_schatten,
  partition_min_trace,
  task_variance,
  mixed_norm,
  smoothed_trace_norm,
};

struct MatrixRegularizerSpec {
  MatrixRegKind kind = MatrixRegKind::frobenius;
  Index d = 0, n = 0;
  double p = 2.0;          // schatten / scaled_schatten / mixed_norm inner
  double q = 1.0;          // mixed_norm outer
  Matrix M;                // scaled_schatten weight, symmetric n x n
  int K = 1;               // partition_min_trace block count
  double epsilon = 1e-8;   // smoothed_trace_norm
  bool squared = false;    // evaluate Omega^2 instead of Omega

  bool claimed_admissible() const {
    if (kind == MatrixRegKind::mixed_norm) return p == 2.0 && q == 2.0;
    return true;
  }

  std::string name() const {
    std::string base;
    switch (kind) {
      case MatrixRegKind::frobenius:
        base = "frobenius";
        break;
      case MatrixRegKind::trace_norm:
        base = "trace_norm";
        break;
      case MatrixRegKind::schatten:
        base = "schatten(" + std::to_string(p) + ")";
        break;
      case MatrixRegKind::rank_kind:
        base = "rank";
        break;
      case MatrixRegKind::scaled_schatten:
        base = "scaled_schatten(" + std::to_string(p) + ")";
        break;
      case MatrixRegKind::partition_min_trace:
        base = "partition_min_trace(K=" + std::to_string(K) + ")";
        break;
      case MatrixRegKind::task_variance:
        base = "task_variance";
        break;
      case MatrixRegKind::mixed_norm:
        base = "mixed_norm(" + std::to_string(p) + "," + std::to_string(q) + ")";
        break;
      case MatrixRegKind::smoothed_trace_norm:
        base = "smoothed_trace_norm(" + std::to_string(epsilon) + ")";
        break;
    }
    return squared ? base + "^2" : base;
  }

  static MatrixRegularizerSpec Frobenius(Index d, Index n, bool squared = false) {
    MatrixRegularizerSpec s;
    s.kind = MatrixRegKind::frobenius;
    s.d = d;
    s.n = n;
    s.squared = squared;
    return s;
  }
  static MatrixRegularizerSpec TraceNorm(Index d, Index n) {
    MatrixRegularizerSpec s;
    s.kind = MatrixRegKind::trace_norm;
    s.d = d;
    s.n = n;
    return s;
  }
  static MatrixRegularizerSpec Schatten(Index d, Index n, double p) {
    if (p < 0.0 || !std::isfinite(p)) throw InvalidSpec("schatten: p must be finite and >= 0");
    MatrixRegularizerSpec s;
    s.kind = MatrixRegKind::schatten;
    s.d = d;
    s.n = n;
    s.p = p;
    return s;
  }
  static MatrixRegularizerSpec Rank(Index d, Index n) {
    MatrixRegularizerSpec s;
    s.kind = MatrixRegKind::rank_kind;
    s.d = d;
    s.n = n;
    return s;
  }
  static MatrixRegularizerSpec ScaledSchatten(Index d, Index n, double p, const Matrix& M) {
    if (M.rows() != n || M.cols() != n) throw InvalidSpec("scaled_schatten: M must be n x n");
    if ((M - M.transpose()).norm() > 1e-9 * (1.0 + M.norm())) {
      throw InvalidSpec("scaled_schatten: M must be symmetric");
    }
    MatrixRegularizerSpec s;
    s.kind = MatrixRegKind::scaled_schatten;
    s.d = d;
    s.n = n;
    s.p = p;
    s.M = M;
    return s;
  }
  static MatrixRegularizerSpec PartitionMinTrace(Index d, Index n, int K) {
    if (n > 8) throw InvalidSpec("partition_min_trace: n <= 8 (exhaustive enumeration)");
    if (K < 1 || K > static_cast<int>(n)) throw InvalidSpec("partition_min_trace: need 1 <= K <= n");
    MatrixRegularizerSpec s;
    s.kind = MatrixRegKind::partition_min_trace;
    s.d = d;
    s.n = n;
    s.K = K;
    return s;
  }
  static MatrixRegularizerSpec TaskVariance(Index d, Index n) {
    MatrixRegularizerSpec s;
    s.kind = MatrixRegKind::task_variance;
    s.d = d;
    s.n = n;
    return s;
  }
  static MatrixRegularizerSpec MixedNorm(Index d, Index n, double p, double q) {
    if (p <= 0.0 || q <= 0.0) throw InvalidSpec("mixed_norm: p, q must be > 0");
    MatrixRegularizerSpec s;
    s.kind = MatrixRegKind::mixed_norm;
    s.d = d;
    s.n = n;
    s.p = p;
    s.q = q;
    return s;
  }
  static MatrixRegularizerSpec SmoothedTraceNorm(Index d, Index n, double epsilon = 1e-8) {
    if (epsilon <= 0.0) throw InvalidSpec("smoothed_trace_norm: epsilon must be > 0");
    MatrixRegularizerSpec s;
    s.kind = MatrixRegKind::smoothed_trace_norm;
    s.d = d;
    s.n = n;
    s.epsilon = epsilon;
    return s;
  }
};

namespace detail {

inline void check_dims(const MatrixRegularizerSpec& reg, const Matrix& W) {
  if (reg.d != W.rows() || reg.n != W.cols()) {
    throw DimensionMismatch("matrix reg: W is " + std::to_string(W.rows()) + "x" +
                            std::to_string(W.cols()) + ", spec wants " + std::to_string(reg.d) +
                            "x" + std::to_string(reg.n));
  }
}

// Enumerates partitions of {0..n-1} into exactly K nonempty blocks
// (restricted growth strings); calls f with the block label of each element.
template <class F>
inline void for_each_partition(int n, int K, F&& f) {
  std::vector<int> label(n, 0);
  // label[i] <= max(label[0..i-1]) + 1; count of distinct labels must be K.
  std::function<void(int, int)> rec = [&](int i, int used) {
    if (n - i < K - used) return;  // cannot reach K blocks any more
    if (i == n) {
      if (used == K) f(label);
      return;
    }
    for (int c = 0; c < std::min(used + 1, K); ++c) {
      label[i] = c;
      rec(i + 1, std::max(used, c + 1));
    }
  };
  rec(0, 0);
}

inline double matrix_eval_base(const MatrixRegularizerSpec& reg, const Matrix& W) {
  switch (reg.kind) {
    case MatrixRegKind::frobenius:
      return W.norm();
    case MatrixRegKind::trace_norm:
      return singular_values(W).sum();
    case MatrixRegKind::schatten:
      return lp_combine(singular_values(W), reg.p);
    case MatrixRegKind::rank_kind:
      return static_cast<double>(rank_of(W));
    case MatrixRegKind::scaled_schatten:
      return lp_combine(singular_values(W * reg.M), reg.p);
    case MatrixRegKind::partition_min_trace: {
      double best = std::numeric_limits<double>::infinity();
      const int n = static_cast<int>(reg.n);
      for_each_partition(n, reg.K, [&](const std::vector<int>& label) {
        double total = 0;
        for (int c = 0; c < reg.K; ++c) {
          std::vector<int> cols;
          for (int j = 0; j < n; ++j)
            if (label[j] == c) cols.push_back(j);
          Matrix sub(W.rows(), static_cast<Index>(cols.size()));
          for (std::size_t j = 0; j < cols.size(); ++j) sub.col(j) = W.col(cols[j]);
          total += singular_values(sub).sum();
        }
        best = std::min(best, total);
      });
      return best;
    }
    case MatrixRegKind::task_variance: {
      const Vector mean = W.rowwise().mean();
      return (W.colwise() - mean).squaredNorm();
    }
    case MatrixRegKind::mixed_norm: {
      Vector rows(W.rows());
      for (Index i = 0; i < W.rows(); ++i) {
        rows[i] = lp_combine(W.row(i).transpose(), reg.p);
      }
      return lp_combine(rows, reg.q);
    }
    case MatrixRegKind::smoothed_trace_norm: {
      const Vector sv = singular_values(W);
      double s = 0;
      // All n smoothed singular values, including the zero ones.
      for (Index i = 0; i < W.cols(); ++i) {
        const double sig = (i < sv.size()) ? sv[i] : 0.0;
        s += std::sqrt(sig * sig + reg.epsilon);
      }
      return s;
    }
  }
  return 0.0;
}

}  // namespace detail

inline double eval(const MatrixRegularizerSpec& reg, const Matrix& W) {
  detail::check_dims(reg, W);
  const double v = detail::matrix_eval_base(reg, W);
  return reg.squared ? v * v : v;
}

inline GradientAvailability gradient_availability(const MatrixRegularizerSpec& reg,
                                                  const Matrix& W) {
  detail::check_dims(reg, W);
  switch (reg.kind) {
    case MatrixRegKind::rank_kind:
    case MatrixRegKind::partition_min_trace:
      return GradientAvailability::nowhere;
    case MatrixRegKind::frobenius:
      if (!reg.squared && W.norm() < 1e-300) return GradientAvailability::none_at_point;
      return GradientAvailability::analytic;
    case MatrixRegKind::trace_norm:
    case MatrixRegKind::schatten: {
      if (reg.kind == MatrixRegKind::schatten && reg.p == 0.0) {
        return GradientAvailability::nowhere;
      }
      const Vector sv = singular_values(W);
      if (sv[0] < 1e-300) return GradientAvailability::none_at_point;
      if (sv[sv.size() - 1] <= kRankRelTol * sv[0]) return GradientAvailability::none_at_point;
      return GradientAvailability::analytic;
    }
    case MatrixRegKind::scaled_schatten: {
      if (reg.p == 0.0) return GradientAvailability::nowhere;
      const Vector sv = singular_values(W * reg.M);
      if (sv[0] < 1e-300) return GradientAvailability::none_at_point;
      if (reg.p < 2.0 && sv[sv.size() - 1] <= kRankRelTol * sv[0]) {
        return GradientAvailability::none_at_point;
      }
      return GradientAvailability::analytic;
    }
    case MatrixRegKind::task_variance:
    case MatrixRegKind::smoothed_trace_norm:
      return GradientAvailability::analytic;
    case MatrixRegKind::mixed_norm: {
      const double scale = std::max(1.0, W.cwiseAbs().maxCoeff());
      double omega = 0;
      for (Index i = 0; i < W.rows(); ++i) {
        const double r = W.row(i).norm();
        if (r <= 1e-12 * scale) {
          if (reg.q <= 1.0) return GradientAvailability::none_at_point;
          continue;
        }
        if (reg.p <= 1.0) {
          for (Index j = 0; j < W.cols(); ++j) {
            if (std::abs(W(i, j)) <= 1e-12 * scale) return GradientAvailability::none_at_point;
          }
        }
        omega += 1;
      }
      if (omega == 0) return GradientAvailability::none_at_point;  // W = 0
      return GradientAvailability::analytic;
    }
  }
  return GradientAvailability::nowhere;
}

namespace detail {

// Gradient of the Schatten p norm (norm form) via the SVD: U diag(g) V^T with
// g_i = S^(1/p - 1) sigma_i^(p - 1), S = sum sigma^p. Valid at full rank.
inline Matrix schatten_grad(const Matrix& W, double p) {
  Eigen::JacobiSVD<Matrix> svd(W, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  if (p == 1.0) {
    return svd.matrixU() * svd.matrixV().transpose();
  }
  double S = 0;
  for (Index i = 0; i < sv.size(); ++i) S += std::pow(sv[i], p);
  const double outer = std::pow(S, 1.0 / p - 1.0);
  Vector g(sv.size());
  for (Index i = 0; i < sv.size(); ++i) g[i] = outer * std::pow(sv[i], p - 1.0);
  return svd.matrixU() * g.asDiagonal() * svd.matrixV().transpose();
}

inline Matrix matrix_grad_base(const MatrixRegularizerSpec& reg, const Matrix& W) {
  switch (reg.kind) {
    case MatrixRegKind::frobenius:
      return W / W.norm();
    case MatrixRegKind::trace_norm:
      return schatten_grad(W, 1.0);
    case MatrixRegKind::schatten:
      return schatten_grad(W, reg.p);
    case MatrixRegKind::scaled_schatten:
      // d/dW ||W M||_p = grad_at(W M) * M^T, M symmetric.
      return schatten_grad(W * reg.M, reg.p) * reg.M;
    case MatrixRegKind::task_variance: {
      const Vector mean = W.rowwise().mean();
      return 2.0 * (W.colwise() - mean);
    }
    case MatrixRegKind::mixed_norm: {
      const double p = reg.p;
      const double q = reg.q;
      Vector rows(W.rows());
      for (Index i = 0; i < W.rows(); ++i) rows[i] = lp_combine(W.row(i).transpose(), p);
      double Sq = 0;
      for (Index i = 0; i < rows.size(); ++i) Sq += std::pow(rows[i], q);
      const double outer = std::pow(Sq, 1.0 / q - 1.0);
      Matrix G = Matrix::Zero(W.rows(), W.cols());
      const double scale = std::max(1.0, W.cwiseAbs().maxCoeff());
      for (Index i = 0; i < W.rows(); ++i) {
        if (rows[i] <= 1e-12 * scale) continue;  // q > 1: zero rows contribute zero gradient
        const double row_factor = outer * std::pow(rows[i], q - 1.0) *
                                  std::pow(rows[i], 1.0 - p);
        for (Index j = 0; j < W.cols(); ++j) {
          const double x = W(i, j);
          if (x == 0.0) continue;  // p > 1 here (else availability rejected)
          G(i, j) = row_factor * std::pow(std::abs(x), p - 1.0) * (x > 0 ? 1.0 : -1.0);
        }
      }
      return G;
    }
    case MatrixRegKind::smoothed_trace_norm: {
      // W (W^T W + eps I)^{-1/2}
      Eigen::SelfAdjointEigenSolver<Matrix> es(W.transpose() * W);
      Vector inv(es.eigenvalues().size());
      for (Index i = 0; i < inv.size(); ++i) {
        inv[i] = 1.0 / std::sqrt(std::max(0.0, es.eigenvalues()[i]) + reg.epsilon);
      }
      return W * (es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose());
    }
    case MatrixRegKind::rank_kind:
    case MatrixRegKind::partition_min_trace:
      break;
  }
  throw NotDifferentiableKind("matrix grad: kind has no gradient");
}

}  // namespace detail

inline Matrix grad(const MatrixRegularizerSpec& reg, const Matrix& W) {
  switch (gradient_availability(reg, W)) {
    case GradientAvailability::nowhere:
      throw NotDifferentiableKind("grad: " + reg.name() + " has no gradient");
    case GradientAvailability::none_at_point:
      if (reg.squared && reg.kind != MatrixRegKind::task_variance) {
        // Omega^2 of a norm is differentiable at 0 with gradient 0.
        if (detail::matrix_eval_base(reg, W) < 1e-150) return Matrix::Zero(W.rows(), W.cols());
      }
      throw NonDifferentiablePoint("grad: " + reg.name() + " not differentiable here");
    case GradientAvailability::analytic:
      break;
  }
  if (reg.squared && reg.kind == MatrixRegKind::frobenius) return 2.0 * W;
  const Matrix g = detail::matrix_grad_base(reg, W);
  if (!reg.squared) return g;
  return 2.0 * detail::matrix_eval_base(reg, W) * g;
}

// ---------------------------------------------------------------------------
// Induced scalar form on the PSD cone
// ---------------------------------------------------------------------------

/**
 * h(A) = Omega(Y A^{1/2}) with Y = [I_n; 0] in R^{d x n}. For penalties
 * that depend on W only through W^T W this recovers Omega exactly:
 * Omega(W) = h(W^T W). Requires d >= 2n and A PSD within tolerance.
 */
inline double induced_h(const MatrixRegularizerSpec& reg, const Matrix& A) {
  if (A.rows() != reg.n || A.cols() != reg.n) {
    throw DimensionMismatch("induced_h: A must be n x n");
  }
  if (reg.d < 2 * reg.n) throw DimsTooSmall("induced_h: requires d >= 2n");
  const Matrix root = psd_sqrt(A);
  Matrix W = Matrix::Zero(reg.d, reg.n);
  W.topRows(reg.n) = root;
  return eval(reg, W);
}

}  // namespace spanreg
