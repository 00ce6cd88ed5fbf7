#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "optim.hpp"

namespace spanreg {

enum class LossKind { square, hinge, logistic };

inline std::string loss_name(LossKind k) {
  switch (k) {
    case LossKind::square:
      return "square";
    case LossKind::hinge:
      return "hinge";
    case LossKind::logistic:
      return "logistic";
  }
  return "?";
}

inline bool loss_is_smooth(LossKind k) { return k != LossKind::hinge; }

// hinge and logistic are margin losses over labels in {-1, +1}.
inline void validate_labels(LossKind k, const Vector& y) {
  if (k == LossKind::square) return;
  for (Index i = 0; i < y.size(); ++i) {
    if (y[i] != 1.0 && y[i] != -1.0) {
      throw InvalidSpec(loss_name(k) + " loss requires outputs in {-1, +1}");
    }
  }
}

namespace detail {

// log(1 + exp(t)) without overflow.
inline double log1pexp(double t) {
  if (t > 35.0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

}  // namespace detail

inline double loss_eval(LossKind k, const Vector& z, const Vector& y) {
  if (z.size() != y.size()) throw DimensionMismatch("loss_eval: z and y sizes differ");
  double s = 0;
  switch (k) {
    case LossKind::square:
      for (Index i = 0; i < z.size(); ++i) s += (z[i] - y[i]) * (z[i] - y[i]);
      return s;
    case LossKind::hinge:
      for (Index i = 0; i < z.size(); ++i) s += std::max(0.0, 1.0 - y[i] * z[i]);
      return s;
    case LossKind::logistic:
      for (Index i = 0; i < z.size(); ++i) s += detail::log1pexp(-y[i] * z[i]);
      return s;
  }
  return s;
}

// Subgradient in z; at hinge kinks the choice is 0.
inline Vector loss_subgrad(LossKind k, const Vector& z, const Vector& y) {
  if (z.size() != y.size()) throw DimensionMismatch("loss_subgrad: z and y sizes differ");
  Vector g(z.size());
  switch (k) {
    case LossKind::square:
      for (Index i = 0; i < z.size(); ++i) g[i] = 2.0 * (z[i] - y[i]);
      return g;
    case LossKind::hinge:
      for (Index i = 0; i < z.size(); ++i) g[i] = (1.0 - y[i] * z[i] > 0.0) ? -y[i] : 0.0;
      return g;
    case LossKind::logistic:
      for (Index i = 0; i < z.size(); ++i) g[i] = -y[i] / (1.0 + std::exp(y[i] * z[i]));
      return g;
  }
  return g;
}

struct DirectionMinimum {
  double a0 = 0;      // minimizer of a -> E(a v, y)
  double value = 0;   // E(a0 v, y)
  bool unique = true; // multi-start agreement
};

/**
 * Minimizes the one-dimensional section a -> E(a v, y). Convex for all three
 * losses, so golden section from several starting brackets either agrees on
 * one minimizer (unique = true) or lands on distinct points of equal value
 * (a flat minimum set, unique = false). Smooth losses get a derivative
 * bisection polish, so stationarity residuals at a0 are at roundoff level.
 */
inline DirectionMinimum direction_minimizer(LossKind k, const Vector& v, const Vector& y) {
  if (v.size() != y.size()) throw DimensionMismatch("direction_minimizer: sizes differ");
  if (v.norm() < 1e-14) throw ZeroVector("direction_minimizer: v = 0");
  validate_labels(k, y);
  auto phi = [&](double a) { return loss_eval(k, a * v, y); };
  std::function<double(double)> dphi = nullptr;
  if (loss_is_smooth(k)) {
    dphi = [&, k](double a) { return loss_subgrad(k, a * v, y).dot(v); };
  }
  const double starts[] = {-100.0, -10.0, -1.0, 0.0, 1.0, 10.0, 100.0};
  std::vector<double> xs, fs;
  for (double s : starts) {
    const double x = minimize_scalar(phi, s, dphi);
    xs.push_back(x);
    fs.push_back(phi(x));
  }
  double fbest = fs[0];
  for (double f : fs) fbest = std::min(fbest, f);
  double amin = std::numeric_limits<double>::infinity();
  double amax = -amin;
  std::size_t ibest = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (fs[i] <= fbest + 1e-10 * (1.0 + std::abs(fbest))) {
      amin = std::min(amin, xs[i]);
      amax = std::max(amax, xs[i]);
      if (fs[i] < fs[ibest]) ibest = i;
    }
  }
  DirectionMinimum out;
  out.a0 = xs[ibest];
  out.value = fs[ibest];
  out.unique = (amax - amin) <= 1e-6 * (1.0 + std::max(std::abs(amin), std::abs(amax)));
  return out;
}

// Residual of the logistic stationarity identity for the direction
// v = (m-2, -1, ..., -1) with unit labels: (m-1) e^{a(m-1)} + e^a - (m-2).
inline double logistic_direction_residual(int m, double a) {
  return (m - 1) * std::exp(a * (m - 1)) + std::exp(a) - (m - 2);
}

}  // namespace spanreg
