#pragma once

#include "errors.hpp"
#include "score_target.hpp"
#include "stein.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>

namespace bbis {

enum class SchemeKind
{
  uniform,
  exact_is,
  stein,
  control_functional,
  control_functional_normalized,
  kde,
  kde_normalized
};

inline std::string to_string(SchemeKind kind)
{
  switch (kind) {
    case SchemeKind::uniform:
      return "uniform";
    case SchemeKind::exact_is:
      return "exact_is";
    case SchemeKind::stein:
      return "stein";
    case SchemeKind::control_functional:
      return "control_functional";
    case SchemeKind::control_functional_normalized:
      return "control_functional_normalized";
    case SchemeKind::kde:
      return "kde";
    case SchemeKind::kde_normalized:
      return "kde_normalized";
  }
  return "unknown";
}

inline SchemeKind scheme_from_string(const std::string& name)
{
  for (auto kind : { SchemeKind::uniform,
                     SchemeKind::exact_is,
                     SchemeKind::stein,
                     SchemeKind::control_functional,
                     SchemeKind::control_functional_normalized,
                     SchemeKind::kde,
                     SchemeKind::kde_normalized }) {
    if (to_string(kind) == name) {
      return kind;
    }
  }
  throw ArgumentError("unknown weighting scheme '" + name + "'");
}

using LogDensityFn = std::function<double(const PointRef&)>;

inline Eigen::VectorXd weights_uniform(Eigen::Index n)
{
  if (n < 1) {
    throw ArgumentError("weights_uniform needs n >= 1");
  }
  return Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
}

//! Self-normalized p(x_i)/q(x_i), computed from log-ratios with the maximum
//! subtracted so neither normalizing constant matters.
inline Eigen::VectorXd weights_exact_is(const ScoreTarget& target,
                                        const LogDensityFn& proposal_log_density,
                                        const PointSet& points)
{
  if (!target.has_log_density()) {
    throw ArgumentError("exact importance weights need the target log-density");
  }
  const Eigen::Index n = points.rows();
  if (n < 1) {
    throw ArgumentError("weights_exact_is needs at least one point");
  }
  Eigen::VectorXd log_ratio(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd x = points.row(i).transpose();
    const double lq = proposal_log_density(x);
    if (!std::isfinite(lq)) {
      throw ArgumentError("proposal log-density is not finite at point " + std::to_string(i));
    }
    log_ratio[i] = target.log_density(x) - lq;
    if (std::isnan(log_ratio[i])) {
      throw NumericalError("target log-density is NaN at point " + std::to_string(i));
    }
  }
  const double top = log_ratio.maxCoeff();
  if (!std::isfinite(top)) {
    throw DegenerateWeightsError("all importance ratios are zero or infinite");
  }
  Eigen::VectorXd w = (log_ratio.array() - top).exp();
  return w / w.sum();
}

inline double control_functional_default_lambda(const SteinGram& gram)
{
  return 1e-8 * static_cast<double>(gram.size()) * std::max(gram.max_diagonal(), 0.0);
}

//! Solves (K_p + 1 1^T + lambda I) w = 1, the minimizer of
//! w^T K_p w + (sum(w) - 1)^2 + lambda |w|^2. Weights may be negative.
//!
//! lambda > 0 uses a Cholesky (LDLT) solve. lambda = 0 uses a complete
//! orthogonal decomposition: singular but consistent systems return the
//! minimum-norm solution, inconsistent ones raise NumericalError.
inline Eigen::VectorXd weights_control_functional(const SteinGram& gram,
                                                  double lambda,
                                                  bool normalize)
{
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ArgumentError("control-functional regularization must be finite and >= 0");
  }
  const Eigen::Index n = gram.size();
  Eigen::MatrixXd system = gram.matrix;
  system.array() += 1.0;
  system.diagonal().array() += lambda;
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd w;
  if (lambda > 0.0) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(system);
    if (ldlt.info() != Eigen::Success) {
      throw NumericalError("control-functional system factorization failed");
    }
    w = ldlt.solve(ones);
  } else {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(system);
    w = cod.solve(ones);
    const double residual = (system * w - ones).norm();
    if (!(residual <= 1e-8 * static_cast<double>(n))) {
      throw NumericalError(
        "control-functional system is singular at lambda = 0; use lambda > 0");
    }
  }
  if (!w.allFinite()) {
    throw NumericalError("control-functional weights are not finite; increase lambda");
  }
  if (normalize) {
    const double total = w.sum();
    if (!(std::abs(total) > std::numeric_limits<double>::min())) {
      throw DegenerateWeightsError("control-functional weights sum to zero");
    }
    w /= total;
  }
  return w;
}

//! h = sigma (d 2^(d+5) Gamma(d/2 + 3) / ((2d + 1) n))^(1/(4+d)) with sigma the
//! mean of the per-coordinate sample standard deviations.
inline double kde_rule_of_thumb_bandwidth(const PointSet& points)
{
  const Eigen::Index n = points.rows();
  const Eigen::Index dim = points.cols();
  if (n < 2 || dim < 1) {
    throw ArgumentError("KDE rule of thumb needs n >= 2 points of dimension >= 1");
  }
  double sigma = 0.0;
  for (Eigen::Index k = 0; k < dim; ++k) {
    const double mean = points.col(k).mean();
    sigma += std::sqrt((points.col(k).array() - mean).square().sum() / static_cast<double>(n - 1));
  }
  sigma /= static_cast<double>(dim);
  if (!(sigma > 0.0)) {
    throw DegenerateBandwidthError("KDE rule of thumb: points have zero spread");
  }
  const double d = static_cast<double>(dim);
  const double ratio =
    d * std::pow(2.0, d + 5.0) * std::tgamma(d / 2.0 + 3.0) / ((2.0 * d + 1.0) * static_cast<double>(n));
  return sigma * std::pow(ratio, 1.0 / (4.0 + d));
}

//! log q_i(x_i) for the leave-one-out Gaussian KDE
//! q_i(x) = sum_{j != i} N(x; x_j, h^2 I) / n.
inline Eigen::VectorXd kde_leave_one_out_log_density(const PointSet& points, double bandwidth)
{
  const Eigen::Index n = points.rows();
  const double d = static_cast<double>(points.cols());
  const double h2 = bandwidth * bandwidth;
  const double log_norm = -0.5 * d * std::log(2.0 * std::numbers::pi * h2) - std::log(static_cast<double>(n));
  Eigen::MatrixXd expo(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      expo(i, j) = -(points.row(i) - points.row(j)).squaredNorm() / (2.0 * h2);
    }
  }
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double top = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) {
        top = std::max(top, expo(i, j));
      }
    }
    double acc = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) {
        acc += std::exp(expo(i, j) - top);
      }
    }
    out[i] = top + std::log(acc) + log_norm;
  }
  return out;
}

//! w_i = n^-1 p(x_i) / q(x_i) from log-densities, optionally self-normalized.
inline Eigen::VectorXd weights_density_ratio(const Eigen::VectorXd& log_p,
                                             const Eigen::VectorXd& log_q,
                                             bool normalize)
{
  const Eigen::Index n = log_p.size();
  if (log_q.size() != n || n < 1) {
    throw ArgumentError("density-ratio weights: length mismatch");
  }
  if (!log_q.allFinite()) {
    throw DegenerateWeightsError("proposal density estimate is zero at some point");
  }
  const Eigen::VectorXd log_w = log_p - log_q;
  if (normalize) {
    const double top = log_w.maxCoeff();
    if (!std::isfinite(top)) {
      throw DegenerateWeightsError("density ratios are all zero or infinite");
    }
    Eigen::VectorXd w = (log_w.array() - top).exp();
    return w / w.sum();
  }
  Eigen::VectorXd w = (log_w.array() - std::log(static_cast<double>(n))).exp();
  if (!w.allFinite()) {
    throw DegenerateWeightsError("density-ratio weights overflow");
  }
  return w;
}

//! Leave-one-out KDE weights. The unnormalized variant needs a normalized
//! target log-density; bandwidth <= 0 selects the rule of thumb.
inline Eigen::VectorXd weights_kde(const ScoreTarget& target,
                                   const PointSet& points,
                                   bool normalize,
                                   double bandwidth = 0.0)
{
  if (!target.has_log_density()) {
    throw ArgumentError("KDE weights need the target log-density");
  }
  if (!normalize && !target.log_density_normalized) {
    throw ArgumentError(
      "unnormalized KDE weights need a normalized target density; use the normalized variant");
  }
  if (points.rows() < 2) {
    throw ArgumentError("KDE weights need at least 2 points");
  }
  const double h = bandwidth > 0.0 ? bandwidth : kde_rule_of_thumb_bandwidth(points);
  Eigen::VectorXd log_p(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    log_p[i] = target.log_density(points.row(i).transpose());
  }
  return weights_density_ratio(log_p, kde_leave_one_out_log_density(points, h), normalize);
}

//! KDE weights with a known proposal density in place of the leave-one-out estimate.
inline Eigen::VectorXd weights_kde_with_proposal(const ScoreTarget& target,
                                                 const LogDensityFn& proposal_log_density,
                                                 const PointSet& points,
                                                 bool normalize)
{
  if (!target.has_log_density()) {
    throw ArgumentError("KDE weights need the target log-density");
  }
  Eigen::VectorXd log_p(points.rows());
  Eigen::VectorXd log_q(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const Eigen::VectorXd x = points.row(i).transpose();
    log_p[i] = target.log_density(x);
    log_q[i] = proposal_log_density(x);
  }
  return weights_density_ratio(log_p, log_q, normalize);
}

} // namespace bbis
