#pragma once

#include <Eigen/Core>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <vector>

#include "linalg.hpp"

// Unconstrained inner minimizers used by the solvers. Gradient descent with
// Armijo backtracking is the baseline; L-BFGS (two-loop recursion, same line
// search) handles the badly conditioned smoothed spectral objectives; a
// diminishing-step subgradient method covers hinge-type nonsmooth objectives.
// Scalar problems get bracketed golden section with optional derivative
// bisection polish.

namespace spanreg {

enum class SmoothAlgorithm { gd, lbfgs };

struct MinimizeOptions {
  long max_iters = 50000;
  double grad_tol = 1e-9;
  SmoothAlgorithm algorithm = SmoothAlgorithm::lbfgs;
  bool record_history = false;
};

struct MinimizeResult {
  Vector x;
  double f = 0;
  double grad_norm = 0;
  long iterations = 0;
  bool converged = false;
  std::vector<double> history;
};

namespace detail {

// Armijo backtracking along direction dir with slope m = g . dir < 0.
// Returns the accepted step (0 if the line search failed entirely).
template <class F>
inline double armijo(F&& f, const Vector& x, double fx, const Vector& dir, double m,
                     double t0) {
  constexpr double c1 = 1e-4;
  double t = t0;
  for (int k = 0; k < 60; ++k) {
    const double ft = f(x + t * dir);
    if (std::isfinite(ft) && ft <= fx + c1 * t * m) return t;
    t *= 0.5;
  }
  return 0.0;
}

}  // namespace detail

template <class F, class G>
inline MinimizeResult minimize_gd(F&& f, G&& g, Vector x, const MinimizeOptions& opts) {
  MinimizeResult res;
  double fx = f(x);
  double t_prev = 1.0;
  long it = 0;
  for (; it < opts.max_iters; ++it) {
    const Vector grad = g(x);
    const double gn = grad.norm();
    if (opts.record_history) res.history.push_back(fx);
    if (!std::isfinite(gn)) break;
    if (gn <= opts.grad_tol) {
      res.converged = true;
      break;
    }
    const Vector dir = -grad;
    const double t = detail::armijo(f, x, fx, dir, -gn * gn, std::min(2.0 * t_prev, 1e8));
    if (t == 0.0) break;  // no progress possible at this scale
    x += t * dir;
    fx = f(x);
    t_prev = t;
  }
  res.x = std::move(x);
  res.f = fx;
  res.grad_norm = g(res.x).norm();
  res.iterations = it;
  return res;
}

template <class F, class G>
inline MinimizeResult minimize_lbfgs(F&& f, G&& g, Vector x, const MinimizeOptions& opts) {
  constexpr int mem = 10;
  MinimizeResult res;
  std::deque<Vector> S, Y;
  std::deque<double> rho;
  double fx = f(x);
  Vector grad = g(x);
  long it = 0;
  for (; it < opts.max_iters; ++it) {
    const double gn = grad.norm();
    if (opts.record_history) res.history.push_back(fx);
    if (!std::isfinite(gn)) break;
    if (gn <= opts.grad_tol) {
      res.converged = true;
      break;
    }
    // Two-loop recursion.
    Vector q = grad;
    std::vector<double> alpha(S.size());
    for (int i = static_cast<int>(S.size()) - 1; i >= 0; --i) {
      alpha[i] = rho[i] * S[i].dot(q);
      q -= alpha[i] * Y[i];
    }
    if (!S.empty()) {
      const double gamma = S.back().dot(Y.back()) / Y.back().squaredNorm();
      q *= gamma;
    }
    for (std::size_t i = 0; i < S.size(); ++i) {
      const double beta = rho[i] * Y[i].dot(q);
      q += (alpha[i] - beta) * S[i];
    }
    Vector dir = -q;
    double m = grad.dot(dir);
    if (m >= 0) {  // not a descent direction; fall back to steepest descent
      dir = -grad;
      m = -gn * gn;
      S.clear();
      Y.clear();
      rho.clear();
    }
    const double t = detail::armijo(f, x, fx, dir, m, 1.0);
    if (t == 0.0) break;
    const Vector x_new = x + t * dir;
    const Vector grad_new = g(x_new);
    const Vector s = x_new - x;
    const Vector y = grad_new - grad;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      S.push_back(s);
      Y.push_back(y);
      rho.push_back(1.0 / sy);
      if (S.size() > mem) {
        S.pop_front();
        Y.pop_front();
        rho.pop_front();
      }
    }
    x = x_new;
    grad = grad_new;
    fx = f(x);
  }
  res.x = std::move(x);
  res.f = fx;
  res.grad_norm = grad.norm();
  res.iterations = it;
  return res;
}

template <class F, class G>
inline MinimizeResult minimize_smooth(F&& f, G&& g, Vector x0, const MinimizeOptions& opts) {
  if (x0.size() == 0) {
    MinimizeResult res;
    res.x = std::move(x0);
    res.f = f(res.x);
    res.converged = true;
    return res;
  }
  if (opts.algorithm == SmoothAlgorithm::gd) return minimize_gd(f, g, std::move(x0), opts);
  return minimize_lbfgs(f, g, std::move(x0), opts);
}

// Projected-free subgradient method with step c/sqrt(k); tracks and returns
// the best iterate. "Converged" means the best value stalled (relative
// improvement below rel_stall_tol over the trailing window).
template <class F, class SG>
inline MinimizeResult minimize_subgradient(F&& f, SG&& sg, Vector x, long max_iters,
                                           double step_c = 1.0,
                                           double rel_stall_tol = 1e-12,
                                           bool record_history = false) {
  MinimizeResult res;
  Vector best_x = x;
  double best_f = f(x);
  double window_best = best_f;
  long window_start = 0;
  res.converged = false;
  long it = 0;
  for (; it < max_iters; ++it) {
    const Vector g = sg(x);
    const double gn = g.norm();
    if (record_history) res.history.push_back(best_f);
    if (gn < 1e-14) {
      res.converged = true;
      break;
    }
    const double t = step_c / ((gn)*std::sqrt(static_cast<double>(it + 1)));
    x -= t * g;
    const double fx = f(x);
    if (fx < best_f) {
      best_f = fx;
      best_x = x;
    }
    constexpr long window = 500;
    if (it - window_start >= window) {
      if (window_best - best_f <= rel_stall_tol * (1.0 + std::abs(best_f))) {
        res.converged = true;
        break;
      }
      window_best = best_f;
      window_start = it;
    }
  }
  res.x = std::move(best_x);
  res.f = best_f;
  res.grad_norm = std::numeric_limits<double>::quiet_NaN();
  res.iterations = it;
  return res;
}

// ---------------------------------------------------------------------------
// Scalar minimization
// ---------------------------------------------------------------------------

// Golden-section search on [lo, hi]; the interval must contain a minimum.
template <class F>
inline double golden_section(F&& f, double lo, double hi, int iters = 200) {
  constexpr double invphi = 0.6180339887498948482;
  double a = lo, b = hi;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters && (b - a) > 1e-16 * (1.0 + std::abs(a) + std::abs(b)); ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

// Expands [lo, hi] geometrically around start until the minimum of f is
// bracketed (f(mid) below both ends) or the window is huge.
template <class F>
inline void bracket_minimum(F&& f, double start, double& lo, double& hi) {
  double w = 1.0;
  lo = start - w;
  hi = start + w;
  for (int i = 0; i < 60; ++i) {
    const double fl = f(lo), fm = f(0.5 * (lo + hi)), fh = f(hi);
    if (fm <= fl && fm <= fh) return;
    w *= 2.0;
    lo = start - w;
    hi = start + w;
  }
}

// Bisection for a root of df on [lo, hi] assuming df(lo) <= 0 <= df(hi).
template <class DF>
inline double bisect_derivative(DF&& df, double lo, double hi, int iters = 200) {
  double flo = df(lo);
  for (int i = 0; i < iters && (hi - lo) > 1e-17 * (1.0 + std::abs(lo) + std::abs(hi)); ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = df(mid);
    if ((fm <= 0) == (flo <= 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/**
 * Minimizes a unimodal scalar function: bracket + golden section, then, when
 * a derivative is supplied and changes sign across a small window around the
 * golden-section result, bisection polish to near machine precision.
 */
template <class F>
inline double minimize_scalar(F&& f, double start = 0.0,
                              const std::function<double(double)>& df = nullptr) {
  double lo, hi;
  bracket_minimum(f, start, lo, hi);
  double x = golden_section(f, lo, hi);
  if (df) {
    double w = 1e-6 * (1.0 + std::abs(x));
    for (int i = 0; i < 40; ++i) {
      const double dlo = df(x - w), dhi = df(x + w);
      if (std::isfinite(dlo) && std::isfinite(dhi) && dlo <= 0.0 && dhi >= 0.0) {
        return bisect_derivative(df, x - w, x + w);
      }
      w *= 2.0;
      if (x - w < lo || x + w > hi) break;
    }
  }
  return x;
}

}  // namespace spanreg
