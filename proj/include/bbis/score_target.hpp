#pragma once

#include "errors.hpp"
#include "kernels.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>

namespace bbis {

//! Closed-form expectations used as ground truth by the experiment harness.
struct ExactMoments
{
  Eigen::VectorXd mean;
  //! Per-coordinate E[x_k^2].
  Eigen::VectorXd second_moment;
  //! (omega, b) -> E[cos(omega^T x + b)].
  std::function<double(const Eigen::VectorXd&, double)> cosine_expectation;
};

//! A density known through its score grad log p, and optionally through an
//! unnormalized log-density.
//!
//! Stein's identity is assumed to hold for the RBF kernel (p smooth on R^d
//! with tails decaying fast enough); nothing here verifies it.
struct ScoreTarget
{
  int dimension = 0;
  std::function<Eigen::VectorXd(const PointRef&)> score;
  //! Empty when the target only provides a score.
  std::function<double(const PointRef&)> log_density;
  //! True when log_density integrates to one (needed by unnormalized KDE weights).
  bool log_density_normalized = false;
  std::optional<ExactMoments> moments;
  std::string name;

  bool has_log_density() const { return static_cast<bool>(log_density); }

  //! Score with dimension and finiteness checks.
  Eigen::VectorXd checked_score(const PointRef& x) const
  {
    if (x.size() != dimension) {
      throw ArgumentError("point dimension " + std::to_string(x.size()) +
                          " does not match target dimension " +
                          std::to_string(dimension));
    }
    Eigen::VectorXd s = score(x);
    if (s.size() != dimension) {
      throw EvaluationError("score returned a vector of wrong dimension");
    }
    if (!s.allFinite()) {
      throw EvaluationError("score is not finite at point " + format_point(x));
    }
    return s;
  }

  static std::string format_point(const PointRef& x)
  {
    std::string out = "(";
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (i > 0) {
        out += ", ";
      }
      out += std::to_string(x[i]);
    }
    return out + ")";
  }
};

} // namespace bbis
