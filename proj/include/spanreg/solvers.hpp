#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "losses.hpp"
#include "optim.hpp"
#include "regularizers.hpp"
#include "rng.hpp"

// Interpolation and regularization solvers in two modes:
//   full    — optimize over the whole feasible set via an affine null-space
//             parameterization (interpolation) or over all of R^d / R^{d x n}
//             (regularization); constraints hold exactly by construction.
//   reduced — restrict to the span of the inputs (w = X^T c, W = Xall C).
// Nondifferentiable trace-type penalties are optimized through the smoothed
// surrogate trace(W^T W + eps I)^{1/2}; reported objectives always use the
// original penalty.

namespace spanreg {

enum class SolveMode { full, reduced };

struct SolveOptions {
  long max_iters = 50000;
  double grad_tol = 1e-9;
  SmoothAlgorithm algorithm = SmoothAlgorithm::lbfgs;
  double smoothing_eps = 1e-8;   // surrogate epsilon for trace-type penalties
  bool continuation = true;      // anneal epsilon from 1e-2 down to smoothing_eps
  double init_scale = 0.0;       // scale of the seeded random start offset
  std::uint64_t seed = 42;
  bool record_history = false;
  long search_budget = 20000;    // evaluation budget of the best-effort search
};

struct VectorProblem {
  Matrix X;  // m x d, one input per row
  Vector y;  // m
};

struct Solution {
  Vector w;
  Matrix W;
  bool is_matrix = false;
  double objective = 0;
  double constraint_residual = 0;  // max-norm residual of interpolation constraints
  double off_span_residual = 0;
  long iterations = 0;
  bool converged = true;
  bool best_effort = false;  // produced by the evaluation-only search
  std::vector<double> history;
};

// ||(I - P_span) w|| / max(||w||, tiny) against the span of the input rows.
inline double off_span_residual(const Vector& w, const Matrix& X) {
  return relative_off_span(span_basis(X.transpose()), w);
}

struct MultiTaskProblem {
  Index d = 0;
  bool shared_inputs = false;
  std::vector<Matrix> X;  // per task (m_t x d); a single entry when shared
  std::vector<Vector> y;  // per task

  Index tasks() const { return static_cast<Index>(y.size()); }
  const Matrix& inputs(Index t) const { return shared_inputs ? X[0] : X[t]; }

  void validate() const {
    if (y.empty()) throw InvalidSpec("multi-task problem: no tasks");
    if (shared_inputs) {
      if (X.size() != 1) throw InvalidSpec("multi-task problem: shared inputs need one X");
    } else if (X.size() != y.size()) {
      throw InvalidSpec("multi-task problem: X and y task counts differ");
    }
    for (Index t = 0; t < tasks(); ++t) {
      if (inputs(t).cols() != d) throw DimensionMismatch("multi-task problem: input dim != d");
      if (inputs(t).rows() != y[t].size()) {
        throw DimensionMismatch("multi-task problem: inputs/outputs count differ");
      }
    }
  }

  // d x (sum m_t) matrix holding every input as a column.
  Matrix all_inputs() const {
    Index total = 0;
    if (shared_inputs) {
      total = X[0].rows();
    } else {
      for (const auto& Xt : X) total += Xt.rows();
    }
    Matrix A(d, total);
    Index at = 0;
    if (shared_inputs) {
      A = X[0].transpose();
    } else {
      for (const auto& Xt : X) {
        A.middleCols(at, Xt.rows()) = Xt.transpose();
        at += Xt.rows();
      }
    }
    return A;
  }
};

// Max over columns of the relative off-span residual against the joint span.
inline double off_span_residual(const Matrix& W, const MultiTaskProblem& prob) {
  const Matrix Q = span_basis(prob.all_inputs());
  double worst = 0;
  for (Index t = 0; t < W.cols(); ++t) {
    worst = std::max(worst, relative_off_span(Q, W.col(t)));
  }
  return worst;
}

namespace detail {

enum class SolveRoute { smooth, subgrad, search };

inline SolveRoute route_of(const VectorRegularizerSpec& reg) {
  switch (reg.kind) {
    case VectorRegKind::squared_l2:
    case VectorRegKind::h_of_norm:
      return SolveRoute::smooth;
    case VectorRegKind::lp_norm:
      if (reg.p > 1.0) return SolveRoute::smooth;
      if (reg.p == 1.0) return SolveRoute::subgrad;
      return SolveRoute::search;  // p in [0, 1): nonconvex, evaluation only
  }
  return SolveRoute::smooth;
}

inline SolveRoute route_of(const MatrixRegularizerSpec& reg) {
  switch (reg.kind) {
    case MatrixRegKind::rank_kind:
    case MatrixRegKind::partition_min_trace:
      return SolveRoute::search;
    case MatrixRegKind::schatten:
      if (reg.p < 1.0) return SolveRoute::search;
      return SolveRoute::smooth;  // p = 1 goes through the smoothed surrogate
    case MatrixRegKind::scaled_schatten:
      if (reg.p < 1.0) return SolveRoute::search;
      if (reg.p == 1.0) return SolveRoute::subgrad;
      return SolveRoute::smooth;
    case MatrixRegKind::mixed_norm:
      if (reg.p < 1.0 || reg.q < 1.0) return SolveRoute::search;
      if (reg.p == 1.0 || reg.q == 1.0) return SolveRoute::subgrad;
      return SolveRoute::smooth;
    case MatrixRegKind::frobenius:
    case MatrixRegKind::trace_norm:
    case MatrixRegKind::task_variance:
    case MatrixRegKind::smoothed_trace_norm:
      return SolveRoute::smooth;
  }
  return SolveRoute::smooth;
}

// Penalties optimized through the smoothed surrogate (epsilon annealed when
// continuation is on): the trace norm and its aliases, plus the smoothed
// kind itself (down to its own epsilon).
inline bool uses_surrogate(const MatrixRegularizerSpec& reg) {
  return reg.kind == MatrixRegKind::trace_norm ||
         (reg.kind == MatrixRegKind::schatten && reg.p == 1.0) ||
         reg.kind == MatrixRegKind::smoothed_trace_norm;
}

inline MatrixRegularizerSpec surrogate_at(const MatrixRegularizerSpec& reg, double eps) {
  MatrixRegularizerSpec s = MatrixRegularizerSpec::SmoothedTraceNorm(reg.d, reg.n, eps);
  s.squared = reg.squared;
  return s;
}

inline std::vector<double> epsilon_schedule(double target, bool continuation) {
  std::vector<double> eps;
  if (continuation) {
    for (double e = 1e-2; e > target * 1.0001; e *= 1e-2) eps.push_back(e);
  }
  eps.push_back(target);
  return eps;
}

// Gradient wrapper: almost-everywhere differentiable penalties may hit a
// kink transiently; 0 is a valid subgradient choice at those points for
// every kink the smooth route can reach (norm-type minima).
inline Vector safe_grad(const VectorRegularizerSpec& reg, const Vector& w) {
  try {
    return grad(reg, w);
  } catch (const NonDifferentiablePoint&) {
    return Vector::Zero(w.size());
  }
}

inline Matrix safe_grad(const MatrixRegularizerSpec& reg, const Matrix& W) {
  try {
    return grad(reg, W);
  } catch (const NonDifferentiablePoint&) {
    return Matrix::Zero(W.rows(), W.cols());
  }
}

// Affine feasible-set parameterization: column j lives on w0[j] + N[j] z_j.
struct AffineParam {
  std::vector<Vector> w0;
  std::vector<Matrix> N;

  Index total_dims() const {
    Index k = 0;
    for (const auto& Nj : N) k += Nj.cols();
    return k;
  }

  Matrix materialize(const Vector& z) const {
    Matrix W(w0[0].size(), static_cast<Index>(w0.size()));
    Index at = 0;
    for (std::size_t j = 0; j < w0.size(); ++j) {
      const Index k = N[j].cols();
      W.col(j) = w0[j];
      if (k > 0) W.col(j) += N[j] * z.segment(at, k);
      at += k;
    }
    return W;
  }

  // Pull a d x n gradient back to z coordinates.
  Vector pullback(const Matrix& G) const {
    Vector g(total_dims());
    Index at = 0;
    for (std::size_t j = 0; j < w0.size(); ++j) {
      const Index k = N[j].cols();
      if (k > 0) g.segment(at, k) = N[j].transpose() * G.col(j);
      at += k;
    }
    return g;
  }
};

// Seeded random start in parameterization coordinates.
inline Vector initial_z(Index dims, const SolveOptions& opts) {
  if (opts.init_scale == 0.0 || dims == 0) return Vector::Zero(dims);
  Rng rng = Rng::for_stream(opts.seed, 0x5EED);
  return opts.init_scale * rng.normal_vector(dims);
}

// Evaluation-only random + coordinate-refinement search used for penalties
// without gradients (lp with p < 1, rank, partition penalties). Restricted
// to small ambient dimension by the callers.
template <class F>
inline std::pair<Vector, long> best_effort_search(F&& f, Index dims, long budget,
                                                  std::uint64_t seed) {
  Vector best = Vector::Zero(dims);
  double fbest = f(best);
  long evals = 1;
  const double scales[] = {0.1, 1.0, 10.0};
  std::uint64_t stream = 0;
  while (evals < budget) {
    Rng rng = Rng::for_stream(seed, 0xBE57 + stream++);
    Vector x = scales[stream % 3] * rng.normal_vector(dims);
    double fx = f(x);
    ++evals;
    double step = 0.5 * (1.0 + x.norm());
    while (step > 1e-10 && evals < budget) {
      bool improved = false;
      for (Index i = 0; i < dims && evals < budget; ++i) {
        for (double s : {step, -step}) {
          Vector cand = x;
          cand[i] += s;
          const double fc = f(cand);
          ++evals;
          if (fc < fx - 1e-15) {
            x = cand;
            fx = fc;
            improved = true;
          }
          if (evals >= budget) break;
        }
      }
      if (!improved) step *= 0.5;
    }
    if (fx < fbest) {
      fbest = fx;
      best = x;
    }
    if (stream > 64 && evals >= budget) break;
  }
  return {best, evals};
}

inline void check_vector_problem(const VectorProblem& prob) {
  if (prob.X.rows() != prob.y.size()) {
    throw DimensionMismatch("vector problem: X rows != y size");
  }
  if (prob.X.rows() < 1 || prob.X.cols() < 1) throw InvalidSpec("vector problem: empty");
}

inline double interpolation_residual_tol(const Vector& y) {
  return 1e-8 * (1.0 + y.cwiseAbs().maxCoeff());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Vector interpolation: min Omega(w) s.t. X w = y
// ---------------------------------------------------------------------------

inline Solution solve_interpolation_vector(const VectorProblem& prob,
                                           const VectorRegularizerSpec& reg, SolveMode mode,
                                           const SolveOptions& opts = {}) {
  detail::check_vector_problem(prob);
  const Matrix& X = prob.X;
  const Vector& y = prob.y;
  const double feas_tol = detail::interpolation_residual_tol(y);

  Solution sol;
  if (mode == SolveMode::reduced) {
    // w = X^T c with the constraints X X^T c = y; every feasible c yields the
    // same w (null directions of the Gram matrix do not move X^T c), so the
    // reduced interpolant is determined without iteration.
    const Matrix G = X * X.transpose();
    const Vector c = min_norm_solution(G, y);
    sol.w = X.transpose() * c;
    sol.constraint_residual = (X * sol.w - y).cwiseAbs().maxCoeff();
    if (sol.constraint_residual > feas_tol) {
      throw Infeasible("solve_interpolation_vector: constraints unsatisfiable");
    }
    sol.objective = eval(reg, sol.w);
    sol.off_span_residual = off_span_residual(sol.w, X);
    sol.iterations = 0;
    sol.converged = true;
    return sol;
  }

  const Vector w0 = min_norm_solution(X, y);
  if ((X * w0 - y).cwiseAbs().maxCoeff() > feas_tol) {
    throw Infeasible("solve_interpolation_vector: constraints unsatisfiable");
  }
  const Matrix N = null_basis(X);
  const Index k = N.cols();
  const detail::SolveRoute route = detail::route_of(reg);

  auto w_of = [&](const Vector& z) -> Vector { return (k > 0) ? Vector(w0 + N * z) : w0; };

  if (k == 0) {
    sol.w = w0;
    sol.converged = true;
  } else if (route == detail::SolveRoute::search) {
    if (X.cols() > 3) {
      throw InvalidSpec("interpolation with " + reg.name() +
                        ": evaluation-only search is limited to d <= 3");
    }
    auto f = [&](const Vector& z) { return eval(reg, w_of(z)); };
    auto [z, evals] = detail::best_effort_search(f, k, opts.search_budget, opts.seed);
    sol.w = w_of(z);
    sol.iterations = evals;
    sol.converged = true;
    sol.best_effort = true;
  } else if (route == detail::SolveRoute::subgrad) {
    auto f = [&](const Vector& z) { return eval(reg, w_of(z)); };
    auto sg = [&](const Vector& z) { return Vector(N.transpose() * detail::safe_grad(reg, w_of(z))); };
    MinimizeResult r = minimize_subgradient(f, sg, detail::initial_z(k, opts), opts.max_iters,
                                            0.1 * (1.0 + w0.norm()), 1e-12, opts.record_history);
    sol.w = w_of(r.x);
    sol.iterations = r.iterations;
    sol.converged = r.converged;
    sol.history = std::move(r.history);
  } else {
    // Smooth path. For lp with p > 1 the optimizer minimizes the p-th power
    // (same minimizer, better conditioned); reported objectives use the norm.
    const bool power_form = (reg.kind == VectorRegKind::lp_norm && reg.p > 1.0);
    auto f = [&](const Vector& z) -> double {
      const Vector w = w_of(z);
      if (!power_form) return eval(reg, w);
      double s = 0;
      for (Index i = 0; i < w.size(); ++i) s += std::pow(std::abs(w[i]), reg.p);
      return s;
    };
    auto g = [&](const Vector& z) -> Vector {
      const Vector w = w_of(z);
      if (!power_form) return N.transpose() * detail::safe_grad(reg, w);
      Vector gw(w.size());
      for (Index i = 0; i < w.size(); ++i) {
        const double aw = std::abs(w[i]);
        gw[i] = (aw == 0.0) ? 0.0 : reg.p * std::pow(aw, reg.p - 1.0) * (w[i] > 0 ? 1.0 : -1.0);
      }
      return N.transpose() * gw;
    };
    MinimizeOptions mo{opts.max_iters, opts.grad_tol, opts.algorithm, opts.record_history};
    MinimizeResult r = minimize_smooth(f, g, detail::initial_z(k, opts), mo);
    sol.w = w_of(r.x);
    sol.iterations = r.iterations;
    sol.converged = r.converged;
    sol.history = std::move(r.history);
  }

  sol.objective = eval(reg, sol.w);
  sol.constraint_residual = (X * sol.w - y).cwiseAbs().maxCoeff();
  sol.off_span_residual = off_span_residual(sol.w, X);
  return sol;
}

// ---------------------------------------------------------------------------
// Vector regularization: min E(X w, y) + gamma Omega(w)
// ---------------------------------------------------------------------------

inline Solution solve_regularization_vector(const VectorProblem& prob,
                                            const VectorRegularizerSpec& reg, double gamma,
                                            LossKind loss, SolveMode mode,
                                            const SolveOptions& opts = {}) {
  detail::check_vector_problem(prob);
  if (gamma < 0) throw InvalidSpec("solve_regularization_vector: gamma < 0");
  validate_labels(loss, prob.y);
  const Matrix& X = prob.X;
  const Vector& y = prob.y;
  const Index d = X.cols();
  const Index m = X.rows();

  // In reduced mode the variable is c with w = X^T c.
  const Index dims = (mode == SolveMode::reduced) ? m : d;
  auto w_of = [&](const Vector& v) -> Vector {
    return (mode == SolveMode::reduced) ? Vector(X.transpose() * v) : v;
  };
  auto pull = [&](const Vector& gw) -> Vector {
    return (mode == SolveMode::reduced) ? Vector(X * gw) : gw;
  };

  auto f = [&](const Vector& v) -> double {
    const Vector w = w_of(v);
    return loss_eval(loss, X * w, y) + gamma * eval(reg, w);
  };
  auto g = [&](const Vector& v) -> Vector {
    const Vector w = w_of(v);
    const Vector gw = X.transpose() * loss_subgrad(loss, X * w, y) +
                      gamma * detail::safe_grad(reg, w);
    return pull(gw);
  };

  const detail::SolveRoute route = detail::route_of(reg);
  Solution sol;
  if (route == detail::SolveRoute::search) {
    if (d > 3) {
      throw InvalidSpec("regularization with " + reg.name() +
                        ": evaluation-only search is limited to d <= 3");
    }
    auto [v, evals] = detail::best_effort_search(f, dims, opts.search_budget, opts.seed);
    sol.w = w_of(v);
    sol.iterations = evals;
    sol.converged = true;
    sol.best_effort = true;
  } else if (route == detail::SolveRoute::subgrad || !loss_is_smooth(loss)) {
    MinimizeResult r = minimize_subgradient(f, g, detail::initial_z(dims, opts), opts.max_iters,
                                            0.5, 1e-12, opts.record_history);
    sol.w = w_of(r.x);
    sol.iterations = r.iterations;
    sol.converged = r.converged;
    sol.history = std::move(r.history);
  } else {
    MinimizeOptions mo{opts.max_iters, opts.grad_tol, opts.algorithm, opts.record_history};
    MinimizeResult r = minimize_smooth(f, g, detail::initial_z(dims, opts), mo);
    sol.w = w_of(r.x);
    sol.iterations = r.iterations;
    sol.converged = r.converged;
    sol.history = std::move(r.history);
  }
  sol.objective = loss_eval(loss, X * sol.w, y) + gamma * eval(reg, sol.w);
  sol.constraint_residual = (X * sol.w - y).cwiseAbs().maxCoeff();
  sol.off_span_residual = off_span_residual(sol.w, X);
  return sol;
}

// ---------------------------------------------------------------------------
// Multi-task solvers
// ---------------------------------------------------------------------------

namespace detail {

// Builds the affine parameterization of the interpolation constraints per
// task column. In full mode columns live in R^d; in reduced mode columns are
// coefficient vectors c_t in R^M with W = Xall C, and the constraints become
// (X_t Xall) c_t = y_t.
inline AffineParam interpolation_param(const MultiTaskProblem& prob, const Matrix* Xall) {
  AffineParam par;
  const Index n = prob.tasks();
  par.w0.resize(n);
  par.N.resize(n);
  for (Index t = 0; t < n; ++t) {
    const Matrix A = Xall ? Matrix(prob.inputs(t) * (*Xall)) : prob.inputs(t);
    par.w0[t] = min_norm_solution(A, prob.y[t]);
    if ((A * par.w0[t] - prob.y[t]).cwiseAbs().maxCoeff() >
        interpolation_residual_tol(prob.y[t])) {
      throw Infeasible("multi-task interpolation: task " + std::to_string(t) +
                       " constraints unsatisfiable");
    }
    par.N[t] = null_basis(A);
  }
  return par;
}

struct MatrixObjective {
  std::function<double(const Matrix&)> f;
  std::function<Matrix(const Matrix&)> g;
};

inline MatrixObjective penalty_objective(const MatrixRegularizerSpec& spec) {
  return {[spec](const Matrix& W) { return eval(spec, W); },
          [spec](const Matrix& W) { return safe_grad(spec, W); }};
}

}  // namespace detail

/**
 * min Omega(W) s.t. X_t w_t = y_t for every task. Full mode optimizes over
 * per-column null spaces; reduced mode writes W = Xall C with Xall holding
 * every input as a column. Trace-type penalties run on the smoothed
 * surrogate with epsilon continuation; Solution.objective reports the
 * original penalty at the solution.
 */
inline Solution solve_interpolation_mtl(const MultiTaskProblem& prob,
                                        const MatrixRegularizerSpec& reg, SolveMode mode,
                                        const SolveOptions& opts = {}) {
  prob.validate();
  if (reg.d != prob.d || reg.n != prob.tasks()) {
    throw DimensionMismatch("solve_interpolation_mtl: spec dims != problem dims");
  }
  const Matrix Xall = prob.all_inputs();
  const bool reduced = (mode == SolveMode::reduced);
  const detail::AffineParam par =
      detail::interpolation_param(prob, reduced ? &Xall : nullptr);
  const Index k = par.total_dims();

  auto W_of = [&](const Vector& z) -> Matrix {
    const Matrix C = par.materialize(z);
    return reduced ? Matrix(Xall * C) : C;
  };
  auto pull = [&](const Matrix& G) -> Vector {
    return reduced ? par.pullback(Xall.transpose() * G) : par.pullback(G);
  };

  const detail::SolveRoute route = detail::route_of(reg);
  Solution sol;
  sol.is_matrix = true;

  if (k == 0) {
    sol.W = W_of(Vector::Zero(0));
    sol.converged = true;
  } else if (route == detail::SolveRoute::search) {
    if (prob.d > 3) {
      throw InvalidSpec("interpolation with " + reg.name() +
                        ": evaluation-only search is limited to d <= 3");
    }
    auto f = [&](const Vector& z) { return eval(reg, W_of(z)); };
    auto [z, evals] = detail::best_effort_search(f, k, opts.search_budget, opts.seed);
    sol.W = W_of(z);
    sol.iterations = evals;
    sol.converged = true;
    sol.best_effort = true;
  } else if (route == detail::SolveRoute::subgrad) {
    auto f = [&](const Vector& z) { return eval(reg, W_of(z)); };
    auto sg = [&](const Vector& z) { return pull(detail::safe_grad(reg, W_of(z))); };
    MinimizeResult r = minimize_subgradient(f, sg, detail::initial_z(k, opts), opts.max_iters,
                                            0.5, 1e-12, opts.record_history);
    sol.W = W_of(r.x);
    sol.iterations = r.iterations;
    sol.converged = r.converged;
    sol.history = std::move(r.history);
  } else {
    Vector z = detail::initial_z(k, opts);
    long total_iters = 0;
    bool converged = true;
    std::vector<double> history;
    if (detail::uses_surrogate(reg)) {
      const double target =
          (reg.kind == MatrixRegKind::smoothed_trace_norm) ? reg.epsilon : opts.smoothing_eps;
      const std::vector<double> schedule = detail::epsilon_schedule(target, opts.continuation);
      for (std::size_t stage = 0; stage < schedule.size(); ++stage) {
        const MatrixRegularizerSpec sur = detail::surrogate_at(reg, schedule[stage]);
        const bool last = (stage + 1 == schedule.size());
        auto f = [&](const Vector& zz) { return eval(sur, W_of(zz)); };
        auto g = [&](const Vector& zz) { return pull(grad(sur, W_of(zz))); };
        MinimizeOptions mo{opts.max_iters, last ? opts.grad_tol : 1e3 * opts.grad_tol,
                           opts.algorithm, opts.record_history};
        MinimizeResult r = minimize_smooth(f, g, std::move(z), mo);
        z = std::move(r.x);
        total_iters += r.iterations;
        if (last) converged = r.converged;
        if (opts.record_history) {
          history.insert(history.end(), r.history.begin(), r.history.end());
        }
      }
    } else {
      auto f = [&](const Vector& zz) { return eval(reg, W_of(zz)); };
      auto g = [&](const Vector& zz) { return pull(detail::safe_grad(reg, W_of(zz))); };
      MinimizeOptions mo{opts.max_iters, opts.grad_tol, opts.algorithm, opts.record_history};
      MinimizeResult r = minimize_smooth(f, g, std::move(z), mo);
      z = std::move(r.x);
      total_iters = r.iterations;
      converged = r.converged;
      history = std::move(r.history);
    }
    sol.W = W_of(z);
    sol.iterations = total_iters;
    sol.converged = converged;
    sol.history = std::move(history);
  }

  sol.objective = eval(reg, sol.W);
  double cres = 0;
  for (Index t = 0; t < prob.tasks(); ++t) {
    cres = std::max(cres, (prob.inputs(t) * sol.W.col(t) - prob.y[t]).cwiseAbs().maxCoeff());
  }
  sol.constraint_residual = cres;
  sol.off_span_residual = off_span_residual(sol.W, prob);
  return sol;
}

/**
 * min sum_t E(X_t w_t, y_t) + gamma Omega(W). Mode semantics match the
 * interpolation solver; hinge and l1-type penalties run on subgradients.
 */
inline Solution solve_regularization_mtl(const MultiTaskProblem& prob,
                                         const MatrixRegularizerSpec& reg, double gamma,
                                         LossKind loss, SolveMode mode,
                                         const SolveOptions& opts = {}) {
  prob.validate();
  if (reg.d != prob.d || reg.n != prob.tasks()) {
    throw DimensionMismatch("solve_regularization_mtl: spec dims != problem dims");
  }
  if (gamma < 0) throw InvalidSpec("solve_regularization_mtl: gamma < 0");
  for (Index t = 0; t < prob.tasks(); ++t) validate_labels(loss, prob.y[t]);

  const Matrix Xall = prob.all_inputs();
  const bool reduced = (mode == SolveMode::reduced);
  const Index n = prob.tasks();
  const Index rows = reduced ? Xall.cols() : prob.d;
  const Index dims = rows * n;

  auto W_of = [&](const Vector& v) -> Matrix {
    const Eigen::Map<const Matrix> C(v.data(), rows, n);
    return reduced ? Matrix(Xall * C) : Matrix(C);
  };
  auto pull = [&](const Matrix& G) -> Vector {
    const Matrix GC = reduced ? Matrix(Xall.transpose() * G) : G;
    return Eigen::Map<const Vector>(GC.data(), GC.size());
  };

  auto data_term = [&](const Matrix& W) -> double {
    double s = 0;
    for (Index t = 0; t < n; ++t) s += loss_eval(loss, prob.inputs(t) * W.col(t), prob.y[t]);
    return s;
  };
  auto data_grad = [&](const Matrix& W) -> Matrix {
    Matrix G(prob.d, n);
    for (Index t = 0; t < n; ++t) {
      G.col(t) =
          prob.inputs(t).transpose() * loss_subgrad(loss, prob.inputs(t) * W.col(t), prob.y[t]);
    }
    return G;
  };

  const detail::SolveRoute route = detail::route_of(reg);
  Solution sol;
  sol.is_matrix = true;

  const MatrixRegularizerSpec optreg =
      detail::uses_surrogate(reg)
          ? detail::surrogate_at(reg, reg.kind == MatrixRegKind::smoothed_trace_norm
                                          ? reg.epsilon
                                          : opts.smoothing_eps)
          : reg;
  auto f = [&](const Vector& v) -> double {
    const Matrix W = W_of(v);
    return data_term(W) + gamma * eval(optreg, W);
  };
  auto g = [&](const Vector& v) -> Vector {
    const Matrix W = W_of(v);
    return pull(data_grad(W) + gamma * detail::safe_grad(optreg, W));
  };

  if (route == detail::SolveRoute::search) {
    if (prob.d > 3) {
      throw InvalidSpec("regularization with " + reg.name() +
                        ": evaluation-only search is limited to d <= 3");
    }
    auto [v, evals] = detail::best_effort_search(f, dims, opts.search_budget, opts.seed);
    sol.W = W_of(v);
    sol.iterations = evals;
    sol.converged = true;
    sol.best_effort = true;
  } else if (route == detail::SolveRoute::subgrad || !loss_is_smooth(loss)) {
    MinimizeResult r = minimize_subgradient(f, g, detail::initial_z(dims, opts), opts.max_iters,
                                            0.5, 1e-12, opts.record_history);
    sol.W = W_of(r.x);
    sol.iterations = r.iterations;
    sol.converged = r.converged;
    sol.history = std::move(r.history);
  } else {
    MinimizeOptions mo{opts.max_iters, opts.grad_tol, opts.algorithm, opts.record_history};
    MinimizeResult r = minimize_smooth(f, g, detail::initial_z(dims, opts), mo);
    sol.W = W_of(r.x);
    sol.iterations = r.iterations;
    sol.converged = r.converged;
    sol.history = std::move(r.history);
  }

  sol.objective = data_term(sol.W) + gamma * eval(reg, sol.W);
  double cres = 0;
  for (Index t = 0; t < n; ++t) {
    cres = std::max(cres, (prob.inputs(t) * sol.W.col(t) - prob.y[t]).cwiseAbs().maxCoeff());
  }
  sol.constraint_residual = cres;
  sol.off_span_residual = off_span_residual(sol.W, prob);
  return sol;
}

// ---------------------------------------------------------------------------
// Gamma path of the vanishing-regularization construction
// ---------------------------------------------------------------------------

struct GammaPathPoint {
  double gamma = 0;
  double c = 0;          // w = c x
  Vector w;
  double objective = 0;  // E((a0 c) v, y) + gamma Omega(c x)
  double limit_gap = 0;  // |<w, x> - <x, x>|
  double omega = 0;      // Omega(w)
};

struct GammaPathReport {
  Vector x, v, y;
  LossKind loss = LossKind::square;
  double a0 = 0;
  double direction_value = 0;
  double omega_x = 0;  // Omega(x)
  std::vector<GammaPathPoint> points;
  bool gap_monotone = true;  // nonincreasing as gamma decreases
  double final_gap = 0;      // gap at the smallest gamma
};

/**
 * Solves min_w E((a0/||x||^2) <w, x> v, y) + gamma Omega(w) over span{x} for
 * each gamma. The constructed inputs are all collinear with x, so the
 * reduced problem is exactly one-dimensional: w = c x. As gamma tends to 0
 * the solution approaches <w, x> = <x, x>, and Omega(w_gamma) <= Omega(x).
 * Throws NotUnique when the direction minimizer is non-unique or zero.
 */
inline GammaPathReport gamma_path(const Vector& x, const VectorRegularizerSpec& reg,
                                  LossKind loss, const Vector& v, const Vector& y,
                                  const std::vector<double>& gammas) {
  if (x.norm() < 1e-14) throw ZeroVector("gamma_path: x = 0");
  if (v.size() != y.size()) throw DimensionMismatch("gamma_path: v and y sizes differ");
  const DirectionMinimum dm = direction_minimizer(loss, v, y);
  if (!dm.unique) {
    throw NotUnique("gamma_path: direction minimizer is not unique for this (loss, v, y)");
  }
  if (std::abs(dm.a0) < 1e-10) {
    throw NotUnique("gamma_path: direction minimizer is zero; the construction needs a0 != 0");
  }

  GammaPathReport rep;
  rep.x = x;
  rep.v = v;
  rep.y = y;
  rep.loss = loss;
  rep.a0 = dm.a0;
  rep.direction_value = dm.value;
  rep.omega_x = eval(reg, x);
  const double xn2 = x.squaredNorm();

  double warm = 1.0;
  for (double gamma_k : gammas) {
    auto f = [&](double c) {
      return loss_eval(loss, (dm.a0 * c) * v, y) + gamma_k * eval(reg, c * x);
    };
    std::function<double(double)> df = nullptr;
    if (loss_is_smooth(loss)) {
      df = [&, gamma_k](double c) -> double {
        const double dloss = dm.a0 * loss_subgrad(loss, (dm.a0 * c) * v, y).dot(v);
        try {
          return dloss + gamma_k * grad(reg, c * x).dot(x);
        } catch (const Error&) {
          return std::numeric_limits<double>::quiet_NaN();
        }
      };
    }
    const double c = minimize_scalar(f, warm, df);
    warm = c;
    GammaPathPoint pt;
    pt.gamma = gamma_k;
    pt.c = c;
    pt.w = c * x;
    pt.objective = f(c);
    pt.limit_gap = std::abs(c * xn2 - xn2);
    pt.omega = eval(reg, pt.w);
    rep.points.push_back(std::move(pt));
  }

  // Monotonicity of the gap along decreasing gamma.
  std::vector<std::size_t> order(rep.points.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rep.points[a].gamma > rep.points[b].gamma;
  });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (rep.points[order[i]].limit_gap >
        rep.points[order[i - 1]].limit_gap + 1e-9 * (1.0 + rep.points[order[i - 1]].limit_gap)) {
      rep.gap_monotone = false;
    }
  }
  if (!order.empty()) rep.final_gap = rep.points[order.back()].limit_gap;
  return rep;
}

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

struct SyntheticMtl {
  MultiTaskProblem problem;
  Matrix Wstar;  // d x n ground truth of rank <= r
};

inline SyntheticMtl gen_synthetic_mtl(Index d, Index n, Index r, Index m_per_task, double noise,
                                      std::uint64_t seed) {
  if (d < 1 || n < 1 || r < 1 || r > std::min(d, n) || m_per_task < 1) {
    throw InvalidSpec("gen_synthetic_mtl: bad dimensions");
  }
  if (noise < 0) throw InvalidSpec("gen_synthetic_mtl: negative noise");
  Rng rng = Rng::for_stream(seed, 0xDA7A);
  SyntheticMtl out;
  const Matrix U = rng.normal_matrix(d, r);
  const Matrix V = rng.normal_matrix(n, r);
  out.Wstar = U * V.transpose();
  out.problem.d = d;
  out.problem.shared_inputs = false;
  for (Index t = 0; t < n; ++t) {
    Matrix Xt = rng.normal_matrix(m_per_task, d);
    Vector yt = Xt * out.Wstar.col(t);
    if (noise > 0) yt += noise * rng.normal_vector(m_per_task);
    out.problem.X.push_back(std::move(Xt));
    out.problem.y.push_back(std::move(yt));
  }
  return out;
}

}  // namespace spanreg
