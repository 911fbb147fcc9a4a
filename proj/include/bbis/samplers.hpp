#pragma once

#include "errors.hpp"
#include "score_target.hpp"
#include "targets.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace bbis {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

//! Seed of the independent stream `index` derived from `seed`. Streams do not
//! depend on how many siblings exist, so chain c is the same for any n_chains.
inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t index)
{
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b)
{
  return derive_stream(derive_stream(seed, a), b);
}

inline Eigen::VectorXd standard_normal_vector(Rng& rng, Eigen::Index d)
{
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    v[k] = normal(rng);
  }
  return v;
}

struct ChainConfig
{
  int n_chains = 1;
  int n_steps = 0;
  double step_size = 0.1;
  //! Chains start from init_scale * N(0, I).
  double init_scale = 1.0;
  //! SGLD only.
  int minibatch_size = 0;
  std::uint64_t seed = 0;

  void validate() const
  {
    if (n_chains < 1 || n_steps < 0) {
      throw ArgumentError("chain config needs n_chains >= 1 and n_steps >= 0");
    }
    if (!(step_size >= 0.0) || !std::isfinite(step_size) || !(init_scale >= 0.0)) {
      throw ArgumentError("chain step size and init scale must be finite and nonnegative");
    }
  }
};

//! Exact draws: component from the categorical weights, then a Gaussian.
inline PointSet sample_gmm_iid(const GaussianMixture& model, int n, std::uint64_t seed)
{
  if (n < 1) {
    throw ArgumentError("sample_gmm_iid needs n >= 1");
  }
  model.validate();
  Rng rng(derive_stream(seed, 0));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd cumulative(model.components());
  std::partial_sum(model.weights.begin(), model.weights.end(), cumulative.begin());
  PointSet out(n, model.dimension());
  for (int i = 0; i < n; ++i) {
    const double u = unif(rng) * cumulative[cumulative.size() - 1];
    int j = 0;
    while (j + 1 < model.components() && u >= cumulative[j]) {
      ++j;
    }
    const double sd = std::sqrt(model.variances[j]);
    for (int k = 0; k < model.dimension(); ++k) {
      out(i, k) = model.means(j, k) + sd * normal(rng);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// MALA
// ---------------------------------------------------------------------------

struct LangevinState
{
  Eigen::VectorXd x;
  double log_density = 0.0;
  Eigen::VectorXd score;
};

inline LangevinState langevin_state(const ScoreTarget& target, const PointRef& x)
{
  LangevinState s{ x, target.log_density(x), target.score(x) };
  if (!std::isfinite(s.log_density) || !s.score.allFinite()) {
    throw EvaluationError("log-density or score not finite at " + ScoreTarget::format_point(x));
  }
  return s;
}

struct MalaStepResult
{
  double accept_probability = 0.0;
  bool accepted = false;
};

//! One MALA transition with caller-supplied noise `xi` and uniform `u`.
//! Proposal x' = x + eps * s(x) + sqrt(2 eps) * xi.
inline MalaStepResult mala_step(const ScoreTarget& target,
                                LangevinState& state,
                                double step_size,
                                const Eigen::VectorXd& xi,
                                double u)
{
  const double eps = step_size;
  Eigen::VectorXd proposal = state.x + eps * state.score + std::sqrt(2.0 * eps) * xi;
  const double logp_new = target.log_density(proposal);
  if (std::isnan(logp_new)) {
    throw EvaluationError("log-density is NaN at proposal " + ScoreTarget::format_point(proposal));
  }
  MalaStepResult result;
  if (logp_new == -std::numeric_limits<double>::infinity()) {
    return result;
  }
  Eigen::VectorXd score_new = target.score(proposal);
  if (!score_new.allFinite()) {
    return result;
  }
  const double forward = (proposal - state.x - eps * state.score).squaredNorm();
  const double backward = (state.x - proposal - eps * score_new).squaredNorm();
  const double log_ratio = logp_new - state.log_density - (backward - forward) / (4.0 * eps);
  result.accept_probability = log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
  if (u < result.accept_probability) {
    result.accepted = true;
    state.x = std::move(proposal);
    state.log_density = logp_new;
    state.score = std::move(score_new);
  }
  return result;
}

//! Runs one MALA chain in its own stream and returns the final state.
inline Eigen::VectorXd mala_chain(const ScoreTarget& target, const ChainConfig& config, int chain)
{
  Rng rng(derive_stream(config.seed, static_cast<std::uint64_t>(chain)));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const Eigen::VectorXd x0 = config.init_scale * standard_normal_vector(rng, target.dimension);
  if (config.n_steps == 0) {
    return x0;
  }
  LangevinState state = langevin_state(target, x0);
  for (int step = 0; step < config.n_steps; ++step) {
    const Eigen::VectorXd xi = standard_normal_vector(rng, target.dimension);
    try {
      mala_step(target, state, config.step_size, xi, unif(rng));
    } catch (const EvaluationError& e) {
      throw EvaluationError(std::string(e.what()) + " (chain " + std::to_string(chain) +
                              ", step " + std::to_string(step) + ")",
                            static_cast<std::size_t>(step));
    }
  }
  return state.x;
}

//! Final states of n_chains independent MALA chains, one per row.
inline PointSet mala_chains(const ScoreTarget& target, const ChainConfig& config)
{
  config.validate();
  if (!target.has_log_density()) {
    throw ArgumentError("MALA needs an unnormalized log-density");
  }
  if (config.n_steps > 0 && !(config.step_size > 0.0)) {
    throw ArgumentError("MALA step size must be positive");
  }
  PointSet out(config.n_chains, target.dimension);
  for (int c = 0; c < config.n_chains; ++c) {
    out.row(c) = mala_chain(target, config, c).transpose();
  }
  return out;
}

//! Summary of a single long MALA run.
struct LongRunSummary
{
  Eigen::VectorXd mean;
  Eigen::VectorXd second_moment;
  //! Every `thin`-th post burn-in draw.
  PointSet thinned;
  double acceptance_rate = 0.0;
  double step_size = 0.0;
};

//! Long single-chain MALA. During burn-in the step size is adapted by
//! Robbins-Monro on log(step) towards `target_acceptance`; it is then frozen.
inline LongRunSummary mala_long_run(const ScoreTarget& target,
                                    const Eigen::VectorXd& start,
                                    long draws,
                                    long burn_in,
                                    double initial_step,
                                    std::uint64_t seed,
                                    int thin = 10,
                                    double target_acceptance = 0.574)
{
  if (draws < 1 || burn_in < 0 || !(initial_step > 0.0) || thin < 1) {
    throw ArgumentError("mala_long_run: invalid run lengths or step size");
  }
  Rng rng(derive_stream(seed, 0));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int d = target.dimension;
  LangevinState state = langevin_state(target, start);
  double log_step = std::log(initial_step);
  for (long t = 0; t < burn_in; ++t) {
    const Eigen::VectorXd xi = standard_normal_vector(rng, d);
    const auto r = mala_step(target, state, std::exp(log_step), xi, unif(rng));
    const double rate = 1.0 / std::pow(static_cast<double>(t) + 10.0, 0.6);
    log_step += rate * (r.accept_probability - target_acceptance);
  }
  LongRunSummary out;
  out.step_size = std::exp(log_step);
  out.mean = Eigen::VectorXd::Zero(d);
  out.second_moment = Eigen::VectorXd::Zero(d);
  out.thinned.resize(draws / thin, d);
  long accepted = 0;
  for (long t = 0; t < draws; ++t) {
    const Eigen::VectorXd xi = standard_normal_vector(rng, d);
    if (mala_step(target, state, out.step_size, xi, unif(rng)).accepted) {
      ++accepted;
    }
    out.mean += state.x;
    out.second_moment += state.x.array().square().matrix();
    if ((t + 1) % thin == 0 && (t + 1) / thin - 1 < out.thinned.rows()) {
      out.thinned.row((t + 1) / thin - 1) = state.x.transpose();
    }
  }
  out.mean /= static_cast<double>(draws);
  out.second_moment /= static_cast<double>(draws);
  out.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(draws);
  return out;
}

// ---------------------------------------------------------------------------
// SGLD
// ---------------------------------------------------------------------------

//! Stochastic estimate of grad log p: prior score plus (N/m) times the
//! likelihood gradient over the mini-batch `rows`.
inline Eigen::VectorXd sgld_drift(const ProbitModel& model,
                                  const PointRef& x,
                                  const std::vector<int>& rows)
{
  Eigen::VectorXd drift = probit_prior_score(model, x);
  if (!rows.empty()) {
    const double scale = static_cast<double>(model.size()) / static_cast<double>(rows.size());
    drift += scale * probit_likelihood_gradient(model, x, rows);
  }
  return drift;
}

//! Final states of n_chains independent SGLD chains (no accept/reject):
//! x <- x + (eps/2) * drift + sqrt(eps) * xi, with a fresh mini-batch drawn
//! without replacement at every step.
inline PointSet sgld_chains(const ProbitModel& model, const ChainConfig& config)
{
  config.validate();
  model.validate();
  const int big_n = model.size();
  const int m = config.minibatch_size > 0 ? config.minibatch_size : big_n;
  if (m > big_n) {
    throw ArgumentError("mini-batch size exceeds the number of observations");
  }
  const int d = model.dimension();
  PointSet out(config.n_chains, d);
  std::vector<int> perm(static_cast<std::size_t>(big_n));
  std::vector<int> batch(static_cast<std::size_t>(m));
  for (int c = 0; c < config.n_chains; ++c) {
    Rng rng(derive_stream(config.seed, static_cast<std::uint64_t>(c)));
    Eigen::VectorXd x = config.init_scale * standard_normal_vector(rng, d);
    std::iota(perm.begin(), perm.end(), 0);
    for (int step = 0; step < config.n_steps; ++step) {
      // Partial Fisher-Yates: the first m entries form the batch.
      for (int k = 0; k < m; ++k) {
        std::uniform_int_distribution<int> pick(k, big_n - 1);
        std::swap(perm[static_cast<std::size_t>(k)],
                  perm[static_cast<std::size_t>(pick(rng))]);
        batch[static_cast<std::size_t>(k)] = perm[static_cast<std::size_t>(k)];
      }
      const Eigen::VectorXd drift = sgld_drift(model, x, batch);
      const Eigen::VectorXd xi = standard_normal_vector(rng, d);
      x += 0.5 * config.step_size * drift + std::sqrt(config.step_size) * xi;
      if (!x.allFinite()) {
        throw EvaluationError("SGLD state diverged (chain " + std::to_string(c) + ", step " +
                                std::to_string(step) + ")",
                              static_cast<std::size_t>(step));
      }
    }
    out.row(c) = x.transpose();
  }
  return out;
}

} // namespace bbis
