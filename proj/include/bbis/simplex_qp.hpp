#pragma once

#include "errors.hpp"
#include "stein.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace bbis {

//! minimize w^T K w  s.t.  sum(w) = 1,  w_i >= lower_bound.
//!
//! lower_bound = 0 is the nonnegative simplex. Negative values give the
//! relaxed polytope whose vertices are b*1 + (1 - n*b) e_i.
class QpProblem
{
public:
  explicit QpProblem(const Eigen::MatrixXd& matrix, double lower_bound = 0.0)
    : matrix_(&matrix)
    , lower_bound_(lower_bound)
  {
    if (matrix.rows() != matrix.cols() || matrix.rows() < 1) {
      throw ArgumentError("QP matrix must be square and non-empty");
    }
    if (!matrix.allFinite()) {
      throw ArgumentError("QP matrix must be finite");
    }
    if (!std::isfinite(lower_bound) ||
        lower_bound * static_cast<double>(matrix.rows()) > 1.0 + 1e-12) {
      throw ArgumentError("lower bound " + std::to_string(lower_bound) +
                          " makes the sum constraint infeasible");
    }
  }

  explicit QpProblem(const SteinGram& gram, double lower_bound = 0.0)
    : QpProblem(gram.matrix, lower_bound)
  {}

  // The matrix is held by reference; temporaries would dangle.
  QpProblem(Eigen::MatrixXd&&, double = 0.0) = delete;
  QpProblem(SteinGram&&, double = 0.0) = delete;

  const Eigen::MatrixXd& matrix() const { return *matrix_; }
  double lower_bound() const { return lower_bound_; }
  Eigen::Index size() const { return matrix_->rows(); }

  double objective(const Eigen::VectorXd& w) const { return w.dot(*matrix_ * w); }

private:
  const Eigen::MatrixXd* matrix_;
  double lower_bound_;
};

enum class QpMethod
{
  mirror_descent,
  frank_wolfe,
  automatic
};

inline std::string to_string(QpMethod method)
{
  switch (method) {
    case QpMethod::mirror_descent:
      return "mirror_descent";
    case QpMethod::frank_wolfe:
      return "frank_wolfe";
    case QpMethod::automatic:
      return "auto";
  }
  return "unknown";
}

struct QpOptions
{
  //! 0 selects the default of 50 * n.
  int max_iters = 0;
  //! NaN selects the per-method default.
  double tol = std::numeric_limits<double>::quiet_NaN();
  bool record_trace = false;
};

struct QpSolution
{
  Eigen::VectorXd weights;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  //! Final Frank-Wolfe gap <w - v, grad f(w)>, an upper bound on suboptimality.
  double gap = 0.0;
  QpMethod method = QpMethod::automatic;
  //! Objective after each accepted iteration (when requested).
  std::vector<double> objective_trace;
};

namespace detail {

inline int resolve_max_iters(const QpOptions& options, Eigen::Index n)
{
  return options.max_iters > 0 ? options.max_iters : static_cast<int>(50 * n);
}

// Single point, all-zero matrix and the fully pinned polytope (n * b = 1)
// have closed-form answers.
inline bool trivial_solution(const QpProblem& problem, QpSolution& out)
{
  const Eigen::Index n = problem.size();
  const double c = 1.0 - static_cast<double>(n) * problem.lower_bound();
  if (n == 1 || problem.matrix().cwiseAbs().maxCoeff() == 0.0 || c <= 1e-15) {
    out.weights = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    out.objective = problem.objective(out.weights);
    out.iterations = 0;
    out.converged = true;
    out.gap = 0.0;
    return true;
  }
  return false;
}

inline double fw_gap(const Eigen::VectorXd& grad, const Eigen::VectorXd& w, double vertex_value)
{
  return grad.dot(w) - vertex_value;
}

} // namespace detail

//! Entropic mirror descent (exponentiated gradient) on the nonnegative
//! simplex, with Nesterov-type acceleration.
//!
//! Starts from uniform weights. The mirror step uses step size 1/(theta L),
//! where L starts at 2 max|K| (step 1/(2 max|K|)), is doubled whenever the
//! quadratic upper bound in the l1 norm is violated and decays slowly after
//! accepted steps. A step that would increase the objective is rejected and
//! the momentum is reset, so the recorded objective sequence is non-increasing.
//! Converges when the relative objective decrease over a sweep of 10
//! iterations falls below tol (default 1e-10), or when even an unaccelerated
//! step no longer decreases the objective.
inline QpSolution solve_mirror_descent(const QpProblem& problem, const QpOptions& options = {})
{
  if (problem.lower_bound() != 0.0) {
    throw UnsupportedConfigError(
      "mirror descent works on the nonnegative simplex only (lower_bound = 0)");
  }
  QpSolution sol;
  sol.method = QpMethod::mirror_descent;
  if (detail::trivial_solution(problem, sol)) {
    return sol;
  }
  const Eigen::MatrixXd& K = problem.matrix();
  const Eigen::Index n = problem.size();
  const int max_iters = detail::resolve_max_iters(options, n);
  const double tol = std::isnan(options.tol) ? 1e-10 : options.tol;
  constexpr int sweep = 10;
  constexpr double floor_weight = 1e-300;

  const double l_init = 2.0 * K.cwiseAbs().maxCoeff();
  double smooth = l_init;
  double theta = 1.0;

  Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  Eigen::VectorXd Kx = K * x;
  Eigen::VectorXd z = x;
  Eigen::VectorXd Kz = Kx;
  double fx = x.dot(Kx);
  Eigen::VectorXd y(n), Ky(n), grad(n), z_new(n), Kz_new(n), x_new(n), Kx_new(n);
  std::vector<double> history{ fx };

  int it = 0;
  bool converged = false;
  while (it < max_iters) {
    ++it;
    y = (1.0 - theta) * x + theta * z;
    Ky = (1.0 - theta) * Kx + theta * Kz;
    grad = 2.0 * Ky;
    if (!grad.allFinite()) {
      throw NumericalError("mirror descent: non-finite gradient");
    }
    const double gmin = grad.minCoeff();
    while (true) {
      const double step = 1.0 / (theta * smooth);
      z_new = (z.array() * (-step * (grad.array() - gmin)).max(-700.0).exp()).matrix();
      z_new /= z_new.sum();
      z_new = z_new.cwiseMax(floor_weight);
      z_new /= z_new.sum();
      Kz_new.noalias() = K * z_new;
      x_new = (1.0 - theta) * x + theta * z_new;
      Kx_new = (1.0 - theta) * Kx + theta * Kz_new;
      const double curvature = (x_new - y).dot(Kx_new - Ky);
      const double l1 = (x_new - y).lpNorm<1>();
      if (curvature <= 0.5 * smooth * l1 * l1 * (1.0 + 1e-12) || smooth > 1e300) {
        break;
      }
      smooth *= 2.0;
    }
    const double f_new = x_new.dot(Kx_new);
    if (!(f_new <= fx)) {
      if (theta == 1.0) {
        // A plain mirror step failed to decrease: stationary to rounding.
        converged = true;
        break;
      }
      theta = 1.0;
      z = x;
      Kz = Kx;
      continue;
    }
    x.swap(x_new);
    Kx.swap(Kx_new);
    z.swap(z_new);
    Kz.swap(Kz_new);
    fx = f_new;
    history.push_back(fx);
    theta = 0.5 * (std::sqrt(theta * theta * theta * theta + 4.0 * theta * theta) - theta * theta);
    smooth = std::max(0.95 * smooth, 1e-12 * l_init);
    if (history.size() > static_cast<std::size_t>(sweep)) {
      const double before = history[history.size() - 1 - sweep];
      const double scale = std::max(std::abs(before), std::numeric_limits<double>::min());
      if ((before - fx) / scale < tol) {
        converged = true;
        break;
      }
    }
  }

  x /= x.sum();
  grad = 2.0 * (K * x);
  sol.weights = x;
  sol.objective = problem.objective(x);
  sol.iterations = it;
  sol.converged = converged;
  sol.gap = std::max(detail::fw_gap(grad, x, grad.minCoeff()), 0.0);
  if (options.record_trace) {
    sol.objective_trace.assign(history.begin() + 1, history.end());
  }
  return sol;
}

//! Pairwise Frank-Wolfe with exact line search over the polytope
//! {sum(w) = 1, w_i >= b}, whose vertices are b*1 + (1 - n b) e_i.
//!
//! The toward vertex is the lowest-index minimal gradient coordinate; mass
//! moves to it from the active vertex with the largest gradient (lowest index
//! on ties). Converges when the Frank-Wolfe gap <w - v, grad f(w)> falls below
//! tol (default 1e-10 * n * max(diag K)).
inline QpSolution solve_frank_wolfe(const QpProblem& problem, const QpOptions& options = {})
{
  QpSolution sol;
  sol.method = QpMethod::frank_wolfe;
  if (detail::trivial_solution(problem, sol)) {
    return sol;
  }
  const Eigen::MatrixXd& K = problem.matrix();
  const Eigen::Index n = problem.size();
  const double dn = static_cast<double>(n);
  const double b = problem.lower_bound();
  // w = b * 1 + c * u with u on the standard simplex.
  const double c = 1.0 - dn * b;
  const int max_iters = detail::resolve_max_iters(options, n);
  const double tol = std::isnan(options.tol)
                       ? 1e-10 * dn * std::max(K.diagonal().cwiseAbs().maxCoeff(), 1e-300)
                       : options.tol;

  Eigen::VectorXd u = Eigen::VectorXd::Constant(n, 1.0 / dn);
  Eigen::VectorXd Ku = K * u;
  const Eigen::VectorXd K1 = K.rowwise().sum();
  Eigen::VectorXd grad(n);

  int it = 0;
  bool converged = false;
  double gap = std::numeric_limits<double>::infinity();
  while (true) {
    grad = 2.0 * (b * K1 + c * Ku);
    if (!grad.allFinite()) {
      throw NumericalError("Frank-Wolfe: non-finite gradient");
    }
    if (options.record_trace && it > 0) {
      const Eigen::VectorXd w = Eigen::VectorXd::Constant(n, b) + c * u;
      sol.objective_trace.push_back(0.5 * w.dot(grad));
    }
    Eigen::Index s = 0;
    Eigen::Index a = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (grad[i] < grad[s]) {
        s = i;
      }
      if (u[i] > 0.0 && (a < 0 || grad[i] > grad[a])) {
        a = i;
      }
    }
    gap = c * (grad.dot(u) - grad[s]);
    if (gap < tol) {
      converged = true;
      break;
    }
    if (it >= max_iters) {
      break;
    }
    // Move mass gamma from vertex a to vertex s; in w-space d = c (e_s - e_a).
    const double slope = c * (grad[s] - grad[a]);
    const double curvature = c * c * (K(s, s) - 2.0 * K(s, a) + K(a, a));
    const double gamma_max = u[a];
    double gamma = gamma_max;
    if (curvature > 0.0) {
      gamma = std::clamp(-slope / (2.0 * curvature), 0.0, gamma_max);
    }
    if (!(slope < 0.0) || gamma <= 0.0) {
      // Rounding leaves no descent pair although the gap is above tol.
      break;
    }
    u[s] += gamma;
    u[a] -= gamma;
    if (gamma == gamma_max) {
      u[a] = 0.0;
    }
    Ku += gamma * (K.col(s) - K.col(a));
    ++it;
    if (it % n == 0) {
      // Refresh the incrementally maintained K u.
      u = u.cwiseMax(0.0);
      u /= u.sum();
      Ku.noalias() = K * u;
    }
  }

  u = u.cwiseMax(0.0);
  u /= u.sum();
  const Eigen::VectorXd w = Eigen::VectorXd::Constant(n, b) + c * u;
  sol.weights = w;
  sol.objective = problem.objective(w);
  sol.iterations = it;
  sol.converged = converged;
  sol.gap = std::max(gap, 0.0);
  return sol;
}

//! Dispatch. `automatic` uses mirror descent on the nonnegative simplex and
//! Frank-Wolfe for any other lower bound.
inline QpSolution solve(const QpProblem& problem,
                        QpMethod method = QpMethod::automatic,
                        const QpOptions& options = {})
{
  if (method == QpMethod::automatic) {
    method = problem.lower_bound() == 0.0 ? QpMethod::mirror_descent : QpMethod::frank_wolfe;
  }
  if (method == QpMethod::mirror_descent) {
    return solve_mirror_descent(problem, options);
  }
  return solve_frank_wolfe(problem, options);
}

//! Effective sample size 1 / sum(w_i^2).
inline double effective_sample_size(const Eigen::VectorXd& w)
{
  return 1.0 / w.squaredNorm();
}

} // namespace bbis
