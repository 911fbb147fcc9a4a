#pragma once

#include "errors.hpp"
#include "score_target.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace bbis {

// ---------------------------------------------------------------------------
// Standard normal helpers
// ---------------------------------------------------------------------------

inline double normal_log_pdf(double t)
{
  return -0.5 * t * t - 0.5 * std::log(2.0 * std::numbers::pi);
}

inline double normal_pdf(double t)
{
  return std::exp(normal_log_pdf(t));
}

inline double normal_cdf(double t)
{
  return 0.5 * std::erfc(-t / std::numbers::sqrt2);
}

namespace detail {

// Below this point Phi(t) is evaluated through the Mills-ratio continued
// fraction instead of erfc.
inline constexpr double mills_switch = -5.0;

//! Mills ratio R(u) = (1 - Phi(u)) / phi(u) for u >= 5, by backward
//! evaluation of R(u) = 1/(u + 1/(u + 2/(u + 3/(u + ...)))).
inline double mills_ratio_upper(double u)
{
  double f = u;
  for (int k = 120; k >= 1; --k) {
    f = u + k / f;
  }
  return 1.0 / f;
}

} // namespace detail

//! log Phi(t), accurate in both tails.
inline double log_normal_cdf(double t)
{
  if (t < detail::mills_switch) {
    return normal_log_pdf(t) + std::log(detail::mills_ratio_upper(-t));
  }
  if (t > 0.0) {
    return std::log1p(-0.5 * std::erfc(t / std::numbers::sqrt2));
  }
  return std::log(normal_cdf(t));
}

//! Inverse Mills ratio phi(t) / Phi(t), finite for all finite t.
inline double inverse_mills_ratio(double t)
{
  if (t < detail::mills_switch) {
    return 1.0 / detail::mills_ratio_upper(-t);
  }
  return normal_pdf(t) / normal_cdf(t);
}

// ---------------------------------------------------------------------------
// Gaussian mixtures
// ---------------------------------------------------------------------------

//! sum_j beta_j N(x; mu_j, sigma_j^2 I). Means are stored one per row.
struct GaussianMixture
{
  Eigen::VectorXd weights;
  Eigen::MatrixXd means;
  Eigen::VectorXd variances;

  int dimension() const { return static_cast<int>(means.cols()); }
  int components() const { return static_cast<int>(means.rows()); }

  void validate() const
  {
    const auto k = means.rows();
    if (k < 1 || means.cols() < 1) {
      throw ArgumentError("mixture needs at least one component and dimension >= 1");
    }
    if (weights.size() != k || variances.size() != k) {
      throw ArgumentError("mixture weights, means and variances disagree in size");
    }
    if ((weights.array() <= 0.0).any() || std::abs(weights.sum() - 1.0) > 1e-12) {
      throw ArgumentError("mixture weights must be positive and sum to one");
    }
    if ((variances.array() <= 0.0).any() || !variances.allFinite() || !means.allFinite()) {
      throw ArgumentError("mixture variances must be positive and parameters finite");
    }
  }
};

namespace detail {

//! Per-component log(beta_j N(x; mu_j, s_j^2 I)).
inline Eigen::VectorXd gmm_component_logs(const GaussianMixture& model, const PointRef& x)
{
  const int k = model.components();
  const double d = model.dimension();
  Eigen::VectorXd logs(k);
  for (int j = 0; j < k; ++j) {
    const double var = model.variances[j];
    const double r2 = (x.transpose() - model.means.row(j)).squaredNorm();
    logs[j] = std::log(model.weights[j]) - 0.5 * d * std::log(2.0 * std::numbers::pi * var) -
              0.5 * r2 / var;
  }
  return logs;
}

} // namespace detail

inline double gmm_log_density(const GaussianMixture& model, const PointRef& x)
{
  const Eigen::VectorXd logs = detail::gmm_component_logs(model, x);
  const double top = logs.maxCoeff();
  return top + std::log((logs.array() - top).exp().sum());
}

//! grad log p via log-sum-exp stabilized responsibilities.
inline Eigen::VectorXd gmm_score(const GaussianMixture& model, const PointRef& x)
{
  if (x.size() != model.dimension()) {
    throw ArgumentError("point dimension does not match mixture dimension");
  }
  Eigen::VectorXd resp = detail::gmm_component_logs(model, x);
  resp = (resp.array() - resp.maxCoeff()).exp();
  resp /= resp.sum();
  Eigen::VectorXd score = Eigen::VectorXd::Zero(x.size());
  for (int j = 0; j < model.components(); ++j) {
    score -= (resp[j] / model.variances[j]) * (x - model.means.row(j).transpose());
  }
  return score;
}

namespace detail {

//! sum_j beta_j v_j written as v_0 + sum_j beta_j (v_j - v_0) / sum_j beta_j,
//! so identical components give v_0 exactly despite weight rounding.
inline double mixture_average(const Eigen::VectorXd& weights, const Eigen::VectorXd& values)
{
  const double v0 = values[0];
  return v0 + weights.dot((values.array() - v0).matrix()) / weights.sum();
}

} // namespace detail

inline ExactMoments gmm_exact_moments(const GaussianMixture& model)
{
  const int dim = model.dimension();
  ExactMoments m;
  m.mean.resize(dim);
  m.second_moment.resize(dim);
  for (int k = 0; k < dim; ++k) {
    const Eigen::VectorXd mu = model.means.col(k);
    m.mean[k] = detail::mixture_average(model.weights, mu);
    m.second_moment[k] =
      detail::mixture_average(model.weights, (mu.array().square() + model.variances.array()).matrix());
  }
  m.cosine_expectation = [model](const Eigen::VectorXd& omega, double b) {
    const double w2 = omega.squaredNorm();
    Eigen::VectorXd terms(model.components());
    for (int j = 0; j < model.components(); ++j) {
      terms[j] = std::exp(-0.5 * model.variances[j] * w2) * std::cos(model.means.row(j).dot(omega) + b);
    }
    return detail::mixture_average(model.weights, terms);
  };
  return m;
}

//! Law of (1 - lambda) x + lambda xi with x ~ model and xi ~ N(0, I):
//! means scale by (1 - lambda), variances become (1 - lambda)^2 s^2 + lambda^2.
inline GaussianMixture gaussianity_interpolation(const GaussianMixture& model, double lambda)
{
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ArgumentError("interpolation parameter must lie in [0, 1]");
  }
  const double keep = 1.0 - lambda;
  GaussianMixture out = model;
  out.means = keep * model.means;
  out.variances = (keep * keep) * model.variances.array() + lambda * lambda;
  return out;
}

inline GaussianMixture standard_normal_mixture(int dimension)
{
  if (dimension < 1) {
    throw ArgumentError("dimension must be >= 1");
  }
  return GaussianMixture{ Eigen::VectorXd::Ones(1),
                          Eigen::MatrixXd::Zero(1, dimension),
                          Eigen::VectorXd::Ones(1) };
}

//! Seeded random mixture: Dirichlet(1) weights, means uniform on
//! [-box, box]^d, variances uniform on [var_lo, var_hi].
inline GaussianMixture random_mixture(int components,
                                      int dimension,
                                      std::uint64_t seed,
                                      double box = 5.0,
                                      double var_lo = 0.3,
                                      double var_hi = 1.0)
{
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> loc(-box, box);
  std::uniform_real_distribution<double> var(var_lo, var_hi);
  GaussianMixture model{ Eigen::VectorXd(components),
                         Eigen::MatrixXd(components, dimension),
                         Eigen::VectorXd(components) };
  for (int j = 0; j < components; ++j) {
    model.weights[j] = expo(rng);
    for (int k = 0; k < dimension; ++k) {
      model.means(j, k) = loc(rng);
    }
    model.variances[j] = var(rng);
  }
  model.weights /= model.weights.sum();
  return model;
}

//! The 20-component 2-d mixture used by the mixture experiments.
inline constexpr std::uint64_t mixture_fixture_seed = 20160614;

inline GaussianMixture mixture_fixture()
{
  return random_mixture(20, 2, mixture_fixture_seed);
}

inline ScoreTarget make_mixture_target(const GaussianMixture& model, std::string name = "gmm")
{
  model.validate();
  ScoreTarget t;
  t.dimension = model.dimension();
  t.score = [model](const PointRef& x) { return gmm_score(model, x); };
  t.log_density = [model](const PointRef& x) { return gmm_log_density(model, x); };
  t.log_density_normalized = true;
  t.moments = gmm_exact_moments(model);
  t.name = std::move(name);
  return t;
}

//! Standard normal N(0, I_d) with closed-form score -x.
inline ScoreTarget make_gaussian_target(int dimension)
{
  if (dimension < 1) {
    throw ArgumentError("dimension must be >= 1");
  }
  ScoreTarget t;
  t.dimension = dimension;
  t.score = [](const PointRef& x) -> Eigen::VectorXd { return -x; };
  t.log_density = [dimension](const PointRef& x) {
    return -0.5 * x.squaredNorm() - 0.5 * dimension * std::log(2.0 * std::numbers::pi);
  };
  t.log_density_normalized = true;
  t.moments = gmm_exact_moments(standard_normal_mixture(dimension));
  t.name = "gaussian";
  return t;
}

// ---------------------------------------------------------------------------
// Bayesian probit regression
// ---------------------------------------------------------------------------

//! Posterior p(x | D) proportional to prod_l Phi(+-x^T chi_l) * N(x; 0, prior_variance I).
//!
//! prior_variance is a variance: N(x; 0, 0.1) gives the prior score -x / 0.1.
struct ProbitModel
{
  Eigen::MatrixXd features; // N x d
  Eigen::VectorXi labels;   // N entries in {0, 1}
  double prior_variance = 0.1;

  int dimension() const { return static_cast<int>(features.cols()); }
  int size() const { return static_cast<int>(features.rows()); }

  void validate() const
  {
    if (features.cols() < 1) {
      throw ArgumentError("probit model needs at least one feature");
    }
    if (labels.size() != features.rows()) {
      throw ArgumentError("probit labels and features disagree in length");
    }
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
      if (labels[i] != 0 && labels[i] != 1) {
        throw ArgumentError("probit labels must be 0 or 1");
      }
    }
    if (!(prior_variance > 0.0) || !features.allFinite()) {
      throw ArgumentError("probit prior variance must be positive and features finite");
    }
  }
};

//! d/dt log p(zeta | t) for one observation.
inline double probit_link_derivative(int label, double t)
{
  return label == 1 ? inverse_mills_ratio(t) : -inverse_mills_ratio(-t);
}

inline double probit_log_density(const ProbitModel& model, const PointRef& x)
{
  const Eigen::VectorXd t = model.features * x;
  double acc = -0.5 * x.squaredNorm() / model.prior_variance;
  for (Eigen::Index l = 0; l < t.size(); ++l) {
    acc += model.labels[l] == 1 ? log_normal_cdf(t[l]) : log_normal_cdf(-t[l]);
  }
  return acc;
}

//! Gradient of the log-likelihood restricted to the observations in `rows`.
inline Eigen::VectorXd probit_likelihood_gradient(const ProbitModel& model,
                                                  const PointRef& x,
                                                  const std::vector<int>& rows)
{
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(x.size());
  for (const int l : rows) {
    const double t = model.features.row(l).dot(x);
    grad += probit_link_derivative(model.labels[l], t) * model.features.row(l).transpose();
  }
  return grad;
}

inline Eigen::VectorXd probit_prior_score(const ProbitModel& model, const PointRef& x)
{
  return -x / model.prior_variance;
}

inline Eigen::VectorXd probit_score(const ProbitModel& model, const PointRef& x)
{
  if (x.size() != model.dimension()) {
    throw ArgumentError("point dimension does not match probit model dimension");
  }
  const Eigen::VectorXd t = model.features * x;
  Eigen::VectorXd coef(t.size());
  for (Eigen::Index l = 0; l < t.size(); ++l) {
    coef[l] = probit_link_derivative(model.labels[l], t[l]);
  }
  return model.features.transpose() * coef + probit_prior_score(model, x);
}

//! Features i.i.d. N(0, 1), labels ~ Bernoulli(Phi(chi^T beta)).
inline ProbitModel probit_simulate(int n_data,
                                   int dimension,
                                   std::uint64_t seed,
                                   const Eigen::VectorXd& true_coefficients,
                                   double prior_variance = 0.1)
{
  if (n_data < 1 || dimension < 1) {
    throw ArgumentError("probit_simulate needs n_data >= 1 and dimension >= 1");
  }
  if (true_coefficients.size() != dimension) {
    throw ArgumentError("true coefficient vector has the wrong dimension");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  ProbitModel model{ Eigen::MatrixXd(n_data, dimension), Eigen::VectorXi(n_data), prior_variance };
  for (int l = 0; l < n_data; ++l) {
    for (int k = 0; k < dimension; ++k) {
      model.features(l, k) = normal(rng);
    }
    const double p = normal_cdf(model.features.row(l).dot(true_coefficients));
    model.labels[l] = unif(rng) < p ? 1 : 0;
  }
  return model;
}

inline ScoreTarget make_probit_target(const ProbitModel& model)
{
  model.validate();
  ScoreTarget t;
  t.dimension = model.dimension();
  t.score = [model](const PointRef& x) { return probit_score(model, x); };
  t.log_density = [model](const PointRef& x) { return probit_log_density(model, x); };
  t.log_density_normalized = false;
  t.name = "probit";
  return t;
}

} // namespace bbis
