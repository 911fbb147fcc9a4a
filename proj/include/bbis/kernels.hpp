#pragma once

#include "errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace bbis {

using Point = Eigen::VectorXd;
using PointRef = Eigen::Ref<const Eigen::VectorXd>;
//! Point sets are stored one point per row.
using PointSet = Eigen::MatrixXd;

enum class KernelFamily
{
  rbf
};

//! Base kernel k(x, y) = exp(-|x - y|^2 / h).
//!
//! The bandwidth lives on the squared-distance scale, so the median of the
//! squared pairwise distances can be used directly. The equivalent length
//! scale of the exp(-|x - y|^2 / (2 s^2)) convention is s = sqrt(h / 2).
class KernelSpec
{
public:
  explicit KernelSpec(double bandwidth, KernelFamily family = KernelFamily::rbf)
    : family_(family)
    , bandwidth_(bandwidth)
  {
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
      throw ArgumentError("kernel bandwidth must be positive and finite, got " +
                          std::to_string(bandwidth));
    }
  }

  KernelFamily family() const { return family_; }
  double bandwidth() const { return bandwidth_; }

  //! Length scale s of the exp(-r^2 / (2 s^2)) convention.
  double length_scale() const { return std::sqrt(bandwidth_ / 2.0); }

private:
  KernelFamily family_;
  double bandwidth_;
};

namespace detail {

inline void check_pair(const PointRef& x, const PointRef& y)
{
  if (x.size() != y.size()) {
    throw ArgumentError("kernel arguments differ in dimension: " +
                        std::to_string(x.size()) + " vs " +
                        std::to_string(y.size()));
  }
  if (x.size() < 1) {
    throw ArgumentError("kernel arguments must have dimension >= 1");
  }
  if (!x.allFinite() || !y.allFinite()) {
    throw ArgumentError("kernel arguments must be finite");
  }
}

} // namespace detail

inline double kernel_eval(const KernelSpec& spec, const PointRef& x, const PointRef& y)
{
  detail::check_pair(x, y);
  return std::exp(-(x - y).squaredNorm() / spec.bandwidth());
}

//! Gradient of k(x, y) with respect to its first argument.
inline Eigen::VectorXd kernel_grad_x(const KernelSpec& spec,
                                     const PointRef& x,
                                     const PointRef& y)
{
  detail::check_pair(x, y);
  const double h = spec.bandwidth();
  Eigen::VectorXd diff = x - y;
  const double k = std::exp(-diff.squaredNorm() / h);
  return (-2.0 / h * k) * diff;
}

//! Gradient of k(x, y) with respect to its second argument.
inline Eigen::VectorXd kernel_grad_y(const KernelSpec& spec,
                                     const PointRef& x,
                                     const PointRef& y)
{
  return -kernel_grad_x(spec, x, y);
}

//! trace(grad_x grad_y k(x, y)) = (2d/h - 4|x - y|^2 / h^2) k(x, y).
inline double kernel_cross_trace(const KernelSpec& spec,
                                 const PointRef& x,
                                 const PointRef& y)
{
  detail::check_pair(x, y);
  const double h = spec.bandwidth();
  const double r2 = (x - y).squaredNorm();
  const double d = static_cast<double>(x.size());
  return (2.0 * d / h - 4.0 * r2 / (h * h)) * std::exp(-r2 / h);
}

//! Median of the squared distances over all unordered pairs of distinct rows.
//! Even counts use the mean of the two middle order statistics.
inline double median_heuristic_bandwidth(const PointSet& points)
{
  const Eigen::Index n = points.rows();
  if (n < 2) {
    throw ArgumentError("median heuristic needs at least 2 points");
  }
  if (!points.allFinite()) {
    throw ArgumentError("median heuristic: points must be finite");
  }
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      dist.push_back((points.row(i) - points.row(j)).squaredNorm());
    }
  }
  const std::size_t m = dist.size();
  const std::size_t mid = m / 2;
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end());
  double median = dist[mid];
  if (m % 2 == 0) {
    const double lower =
      *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (lower + median);
  }
  if (!(median > 0.0)) {
    throw DegenerateBandwidthError(
      "median heuristic bandwidth is zero (points are identical)");
  }
  return median;
}

} // namespace bbis
