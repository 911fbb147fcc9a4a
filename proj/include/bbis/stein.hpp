#pragma once

#include "errors.hpp"
#include "kernels.hpp"
#include "score_target.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

namespace bbis {

//! Steinalized kernel from precomputed scores.
//!
//! k_p(x, y) = k s_x^T s_y + s_x^T grad_y k + s_y^T grad_x k + tr(grad_x grad_y k),
//! which for the RBF base kernel collapses to
//! k * (s_x^T s_y + (2/h)(s_x - s_y)^T (x - y) + 2d/h - 4|x - y|^2/h^2).
inline double stein_kernel_from_scores(const KernelSpec& spec,
                                       const PointRef& x,
                                       const PointRef& y,
                                       const PointRef& score_x,
                                       const PointRef& score_y)
{
  const double h = spec.bandwidth();
  const double d = static_cast<double>(x.size());
  double r2 = 0.0;
  double cross = 0.0;
  double drift = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double diff = x[k] - y[k];
    r2 += diff * diff;
    cross += score_x[k] * score_y[k];
    drift += (score_x[k] - score_y[k]) * diff;
  }
  const double base = std::exp(-r2 / h);
  return base * (cross + 2.0 / h * drift + 2.0 * d / h - 4.0 * r2 / (h * h));
}

inline double stein_kernel_eval(const ScoreTarget& target,
                                const KernelSpec& spec,
                                const PointRef& x,
                                const PointRef& y)
{
  detail::check_pair(x, y);
  const Eigen::VectorXd sx = target.checked_score(x);
  const Eigen::VectorXd sy = target.checked_score(y);
  return stein_kernel_from_scores(spec, x, y, sx, sy);
}

//! 64-bit FNV-1a over the shape and raw bytes of a point set.
inline std::uint64_t point_set_digest(const PointSet& points)
{
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  auto mix = [&hash](std::uint64_t word) {
    for (int b = 0; b < 8; ++b) {
      hash ^= (word >> (8 * b)) & 0xffULL;
      hash *= 0x100000001b3ULL;
    }
  };
  mix(static_cast<std::uint64_t>(points.rows()));
  mix(static_cast<std::uint64_t>(points.cols()));
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
      mix(std::bit_cast<std::uint64_t>(points(i, j)));
    }
  }
  return hash;
}

//! The matrix K_p = [k_p(x_i, x_j)] on one point set.
struct SteinGram
{
  Eigen::MatrixXd matrix;
  std::uint64_t points_digest = 0;
  KernelSpec kernel{ 1.0 };

  Eigen::Index size() const { return matrix.rows(); }
  double max_diagonal() const
  {
    return matrix.size() == 0 ? 0.0 : matrix.diagonal().maxCoeff();
  }
};

//! Assembles the Steinalized Gram matrix. Scores are evaluated once per
//! point; the upper triangle is computed and mirrored so the result is
//! exactly symmetric.
inline SteinGram stein_gram(const ScoreTarget& target,
                            const KernelSpec& spec,
                            const PointSet& points)
{
  const Eigen::Index n = points.rows();
  if (n < 1) {
    throw ArgumentError("stein_gram needs at least one point");
  }
  if (points.cols() != target.dimension) {
    throw ArgumentError("point dimension " + std::to_string(points.cols()) +
                        " does not match target dimension " +
                        std::to_string(target.dimension));
  }
  if (!points.allFinite()) {
    throw ArgumentError("stein_gram: points must be finite");
  }
  Eigen::MatrixXd scores(n, points.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    try {
      scores.row(i) = target.checked_score(points.row(i).transpose()).transpose();
    } catch (const EvaluationError& e) {
      throw EvaluationError(std::string(e.what()) + " (point index " +
                              std::to_string(i) + ")",
                            static_cast<std::size_t>(i));
    }
  }
  // Column-major storage: work on columns so that x_j and s_j stay contiguous.
  const Eigen::MatrixXd pts_t = points.transpose();
  const Eigen::MatrixXd scores_t = scores.transpose();
  SteinGram gram{ Eigen::MatrixXd(n, n), point_set_digest(points), spec };
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i <= j; ++i) {
      const double v = stein_kernel_from_scores(
        spec, pts_t.col(i), pts_t.col(j), scores_t.col(i), scores_t.col(j));
      gram.matrix(i, j) = v;
      gram.matrix(j, i) = v;
    }
  }
  return gram;
}

//! w^T K_p w, clamped to zero inside the PSD slack 1e-10 * n * max(diag).
inline double ksd_weighted(const SteinGram& gram, const Eigen::VectorXd& w)
{
  const Eigen::Index n = gram.size();
  if (w.size() != n) {
    throw ArgumentError("weight vector length " + std::to_string(w.size()) +
                        " does not match Gram size " + std::to_string(n));
  }
  const double raw = w.dot(gram.matrix * w);
  if (!std::isfinite(raw)) {
    throw NumericalError("KSD is not finite");
  }
  if (raw >= 0.0) {
    return raw;
  }
  const double slack = 1e-10 * static_cast<double>(n) * std::max(gram.max_diagonal(), 0.0);
  if (raw >= -slack) {
    return 0.0;
  }
  throw NumericalError("KSD quadratic form is negative (" + std::to_string(raw) +
                       "); the Stein Gram matrix is not positive semidefinite");
}

//! Nodes and weights of a quadrature rule over R^d (d <= 2).
struct QuadratureGrid
{
  PointSet nodes;
  Eigen::VectorXd weights;
};

//! Composite trapezoid rule with `nodes` equally spaced points on [lo, hi].
inline QuadratureGrid trapezoid_grid_1d(double lo, double hi, int nodes)
{
  if (nodes < 1 || !(hi >= lo)) {
    throw ArgumentError("trapezoid grid needs nodes >= 1 and hi >= lo");
  }
  QuadratureGrid grid{ PointSet(nodes, 1), Eigen::VectorXd(nodes) };
  if (nodes == 1) {
    grid.nodes(0, 0) = lo;
    grid.weights[0] = 0.0;
    return grid;
  }
  const double step = (hi - lo) / (nodes - 1);
  for (int i = 0; i < nodes; ++i) {
    grid.nodes(i, 0) = lo + step * i;
    grid.weights[i] = (i == 0 || i == nodes - 1) ? 0.5 * step : step;
  }
  return grid;
}

//! Tensor product of two 1-d rules.
inline QuadratureGrid tensor_grid_2d(const QuadratureGrid& a, const QuadratureGrid& b)
{
  const Eigen::Index m = a.nodes.rows() * b.nodes.rows();
  QuadratureGrid grid{ PointSet(m, 2), Eigen::VectorXd(m) };
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < a.nodes.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.nodes.rows(); ++j, ++k) {
      grid.nodes(k, 0) = a.nodes(i, 0);
      grid.nodes(k, 1) = b.nodes(j, 0);
      grid.weights[k] = a.weights[i] * b.weights[j];
    }
  }
  return grid;
}

//! Quadrature estimate of E_{x~p}[k_p(x, y)], which is zero for targets in
//! the Stein class of the kernel. The density is normalized on the grid, so
//! log_density may be unnormalized.
inline double stein_identity_check(const ScoreTarget& target,
                                   const KernelSpec& spec,
                                   const PointRef& y,
                                   const QuadratureGrid& grid)
{
  if (!target.has_log_density()) {
    throw ArgumentError("stein_identity_check needs a log-density");
  }
  if (target.dimension > 2) {
    throw ArgumentError("stein_identity_check supports dimension <= 2");
  }
  if (grid.nodes.cols() != target.dimension ||
      grid.nodes.rows() != grid.weights.size()) {
    throw ArgumentError("quadrature grid does not match target dimension");
  }
  const Eigen::Index m = grid.nodes.rows();
  Eigen::VectorXd logp(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    logp[i] = target.log_density(grid.nodes.row(i).transpose());
  }
  const double top = logp.maxCoeff();
  const Eigen::VectorXd sy = target.checked_score(y);
  double mass = 0.0;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double wp = grid.weights[i] * std::exp(logp[i] - top);
    if (wp == 0.0) {
      continue;
    }
    const Eigen::VectorXd x = grid.nodes.row(i).transpose();
    mass += wp;
    acc += wp * stein_kernel_from_scores(spec, x, y, target.checked_score(x), sy);
  }
  if (!(mass > 0.0)) {
    throw ArgumentError("quadrature grid carries zero probability mass");
  }
  return acc / mass;
}

namespace detail {

inline void write_u64_le(std::ostream& out, std::uint64_t v)
{
  char bytes[8];
  for (int b = 0; b < 8; ++b) {
    bytes[b] = static_cast<char>((v >> (8 * b)) & 0xffU);
  }
  out.write(bytes, 8);
}

inline std::uint64_t read_u64_le(std::istream& in)
{
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  if (!in) {
    throw ArgumentError("unexpected end of Gram matrix stream");
  }
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) {
    v |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
  }
  return v;
}

} // namespace detail

//! Fixture format: little-endian u64 n, then n*n little-endian f64, row-major.
inline void write_gram_matrix(std::ostream& out, const Eigen::MatrixXd& matrix)
{
  const auto n = static_cast<std::uint64_t>(matrix.rows());
  detail::write_u64_le(out, n);
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
      detail::write_u64_le(out, std::bit_cast<std::uint64_t>(matrix(i, j)));
    }
  }
}

inline Eigen::MatrixXd read_gram_matrix(std::istream& in)
{
  const std::uint64_t n = detail::read_u64_le(in);
  if (n > (1ULL << 20)) {
    throw ArgumentError("Gram matrix header declares an implausible size");
  }
  const auto size = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd matrix(size, size);
  for (Eigen::Index i = 0; i < size; ++i) {
    for (Eigen::Index j = 0; j < size; ++j) {
      matrix(i, j) = std::bit_cast<double>(detail::read_u64_le(in));
    }
  }
  return matrix;
}

} // namespace bbis
