#pragma once

#include "baselines.hpp"
#include "errors.hpp"
#include "kernels.hpp"
#include "samplers.hpp"
#include "score_target.hpp"
#include "simplex_qp.hpp"
#include "stein.hpp"
#include "targets.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

namespace bbis {

// ---------------------------------------------------------------------------
// Test functions
// ---------------------------------------------------------------------------

enum class TestFunctionKind
{
  coordinate_mean,
  coordinate_square,
  random_cosine
};

inline std::string to_string(TestFunctionKind kind)
{
  switch (kind) {
    case TestFunctionKind::coordinate_mean:
      return "x";
    case TestFunctionKind::coordinate_square:
      return "x2";
    case TestFunctionKind::random_cosine:
      return "cos";
  }
  return "unknown";
}

inline TestFunctionKind test_function_from_string(const std::string& name)
{
  if (name == "x" || name == "coordinate_mean") {
    return TestFunctionKind::coordinate_mean;
  }
  if (name == "x2" || name == "coordinate_square") {
    return TestFunctionKind::coordinate_square;
  }
  if (name == "cos" || name == "random_cosine") {
    return TestFunctionKind::random_cosine;
  }
  throw ArgumentError("unknown test function '" + name + "'");
}

//! h(x) = x, x^2 (per coordinate) or cos(omega^T x + b).
struct TestFunction
{
  TestFunctionKind kind = TestFunctionKind::coordinate_mean;
  Eigen::VectorXd omega;
  double phase = 0.0;

  //! omega ~ N(0, I_d), b ~ U[0, 2 pi).
  static TestFunction random_cosine(Rng& rng, int dimension)
  {
    TestFunction f{ TestFunctionKind::random_cosine, standard_normal_vector(rng, dimension), 0.0 };
    f.phase = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
    return f;
  }
};

//! Per-point values, one row per point: d columns for the coordinate
//! functions, one column for the cosine.
inline Eigen::MatrixXd test_function_eval(const TestFunction& f, const PointSet& points)
{
  switch (f.kind) {
    case TestFunctionKind::coordinate_mean:
      return points;
    case TestFunctionKind::coordinate_square:
      return points.array().square().matrix();
    case TestFunctionKind::random_cosine: {
      if (f.omega.size() != points.cols()) {
        throw ArgumentError("cosine frequency has the wrong dimension");
      }
      return ((points * f.omega).array() + f.phase).cos().matrix();
    }
  }
  throw ArgumentError("unknown test function");
}

inline Eigen::VectorXd test_function_truth(const TestFunction& f, const ExactMoments& truth)
{
  switch (f.kind) {
    case TestFunctionKind::coordinate_mean:
      return truth.mean;
    case TestFunctionKind::coordinate_square:
      return truth.second_moment;
    case TestFunctionKind::random_cosine:
      if (!truth.cosine_expectation) {
        throw ArgumentError("ground truth has no cosine expectation");
      }
      return Eigen::VectorXd::Constant(1, truth.cosine_expectation(f.omega, f.phase));
  }
  throw ArgumentError("unknown test function");
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct TargetConfig
{
  //! gaussian | gmm | gmm_interp | probit
  std::string kind = "gmm";
  int dimension = 2;
  //! Explicit mixture; the built-in fixture is used when empty.
  std::optional<GaussianMixture> mixture;
  double lambda = 0.0;

  int n_data = 100;
  std::uint64_t data_seed = 1;
  double prior_variance = 0.1;
  //! Explicit data set; simulated from data_seed when empty.
  std::optional<ProbitModel> probit;

  long truth_draws = 1000000;
  long truth_burn_in = 20000;
  std::uint64_t truth_seed = 7;
};

struct SamplerConfig
{
  //! iid | mala | sgld
  std::string kind = "iid";
  //! iid only: draw from this mixture instead of the target.
  std::optional<GaussianMixture> proposal;
  int steps = 10;
  double step_size = 0.1;
  double init_scale = 1.0;
  int minibatch_size = 100;
};

struct SchemeConfig
{
  SchemeKind kind = SchemeKind::stein;
  std::string label;
  //! stein only.
  double lower_bound = 0.0;
  QpMethod method = QpMethod::automatic;
  QpOptions qp;
  //! control functional only; NaN selects 1e-8 * n * max(diag K_p).
  double cf_lambda = std::numeric_limits<double>::quiet_NaN();

  std::string name() const { return label.empty() ? to_string(kind) : label; }
};

struct ExperimentConfig
{
  TargetConfig target;
  SamplerConfig sampler;
  std::vector<SchemeConfig> schemes;
  std::vector<int> n_grid;
  int trials = 1;
  std::vector<TestFunctionKind> test_functions{ TestFunctionKind::coordinate_mean };
  std::uint64_t seed = 0;
  std::string output;
  //! wall_ms is written as 0 unless set; timings would break byte-identical reruns.
  bool record_wall_time = false;
  //! When false the Stein Gram matrix is built only for schemes that need it
  //! and the ksd column is left empty; for very large n with cheap schemes.
  bool compute_ksd = true;

  bool needs_gram() const
  {
    return compute_ksd || std::any_of(schemes.begin(), schemes.end(), [](const SchemeConfig& s) {
             return s.kind == SchemeKind::stein || s.kind == SchemeKind::control_functional ||
                    s.kind == SchemeKind::control_functional_normalized;
           });
  }

  void validate() const
  {
    if (n_grid.empty()) {
      throw ArgumentError("n grid must not be empty");
    }
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
      if (n_grid[i] < 2 || (i > 0 && n_grid[i] <= n_grid[i - 1])) {
        throw ArgumentError("n grid must be strictly increasing with entries >= 2");
      }
    }
    if (trials < 1) {
      throw ArgumentError("trials must be >= 1");
    }
    if (schemes.empty() || test_functions.empty()) {
      throw ArgumentError("need at least one scheme and one test function");
    }
  }
};

//! Target, ground truth and point generator resolved from a config.
struct ExperimentSetup
{
  ScoreTarget target;
  ExactMoments truth;
  std::function<PointSet(int, std::uint64_t)> sampler;
  //! Set when the sampling density is known (i.i.d. samplers).
  LogDensityFn proposal_log_density;
};

inline ProbitModel resolve_probit(const TargetConfig& config)
{
  if (config.probit) {
    return *config.probit;
  }
  Rng rng(derive_stream(config.data_seed, 0xbeef));
  Eigen::VectorXd beta = std::sqrt(config.prior_variance) * standard_normal_vector(rng, config.dimension);
  return probit_simulate(config.n_data, config.dimension, config.data_seed, beta, config.prior_variance);
}

inline GaussianMixture resolve_mixture(const TargetConfig& config)
{
  if (config.kind == "gaussian") {
    return standard_normal_mixture(config.dimension);
  }
  GaussianMixture base = config.mixture ? *config.mixture : mixture_fixture();
  if (config.kind == "gmm_interp") {
    return gaussianity_interpolation(base, config.lambda);
  }
  return base;
}

//! Long-run MALA ground truth for targets without closed-form moments.
inline ExactMoments long_run_truth(const ScoreTarget& target, const TargetConfig& config)
{
  const Eigen::VectorXd start = Eigen::VectorXd::Zero(target.dimension);
  const LongRunSummary run = mala_long_run(
    target, start, config.truth_draws, config.truth_burn_in, 0.01, config.truth_seed, 10);
  ExactMoments m;
  m.mean = run.mean;
  m.second_moment = run.second_moment;
  const PointSet draws = run.thinned;
  m.cosine_expectation = [draws](const Eigen::VectorXd& omega, double b) {
    return ((draws * omega).array() + b).cos().mean();
  };
  return m;
}

inline bool is_mixture_kind(const std::string& kind)
{
  return kind == "gaussian" || kind == "gmm" || kind == "gmm_interp";
}

//! Target only, without ground truth.
inline ScoreTarget build_target(const TargetConfig& tc)
{
  if (tc.kind == "probit") {
    return make_probit_target(resolve_probit(tc));
  }
  if (tc.kind == "gaussian") {
    return make_gaussian_target(tc.dimension);
  }
  if (is_mixture_kind(tc.kind)) {
    return make_mixture_target(resolve_mixture(tc), tc.kind);
  }
  throw ArgumentError("unknown target kind '" + tc.kind + "'");
}

inline ExperimentSetup build_setup(const ExperimentConfig& config)
{
  ExperimentSetup setup;
  const TargetConfig& tc = config.target;
  const SamplerConfig& sc = config.sampler;
  std::optional<ProbitModel> probit;
  std::optional<GaussianMixture> mixture;
  setup.target = build_target(tc);
  if (tc.kind == "probit") {
    probit = resolve_probit(tc);
    setup.truth = long_run_truth(setup.target, tc);
  } else {
    mixture = resolve_mixture(tc);
    setup.truth = *setup.target.moments;
  }

  if (sc.kind == "iid") {
    const GaussianMixture source = sc.proposal ? *sc.proposal : (mixture ? *mixture : GaussianMixture{});
    if (!sc.proposal && !mixture) {
      throw ArgumentError("i.i.d. sampling needs a mixture target or an explicit proposal");
    }
    source.validate();
    if (source.dimension() != setup.target.dimension) {
      throw ArgumentError("proposal dimension does not match the target");
    }
    setup.sampler = [source](int n, std::uint64_t seed) { return sample_gmm_iid(source, n, seed); };
    setup.proposal_log_density = [source](const PointRef& x) { return gmm_log_density(source, x); };
  } else if (sc.kind == "mala") {
    const ScoreTarget target = setup.target;
    setup.sampler = [target, sc](int n, std::uint64_t seed) {
      ChainConfig cc{ n, sc.steps, sc.step_size, sc.init_scale, 0, seed };
      return mala_chains(target, cc);
    };
  } else if (sc.kind == "sgld") {
    if (!probit) {
      throw ArgumentError("SGLD sampling needs the probit target");
    }
    const ProbitModel model = *probit;
    setup.sampler = [model, sc](int n, std::uint64_t seed) {
      ChainConfig cc{ n, sc.steps, sc.step_size, sc.init_scale, sc.minibatch_size, seed };
      return sgld_chains(model, cc);
    };
  } else {
    throw ArgumentError("unknown sampler kind '" + sc.kind + "'");
  }
  return setup;
}

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

struct ExperimentRecord
{
  std::string scheme;
  int n = 0;
  int trial = 0;
  //! "x:k" / "x2:k" per coordinate k, or "cos".
  std::string test_fn;
  double estimate = std::numeric_limits<double>::quiet_NaN();
  double truth = std::numeric_limits<double>::quiet_NaN();
  double sq_error = std::numeric_limits<double>::quiet_NaN();
  double ksd = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  double wall_ms = 0.0;
  //! "ok" or "failed".
  std::string status = "ok";
  std::string message;

  bool ok() const { return status == "ok"; }
};

struct SummaryRow
{
  std::string scheme;
  int n = 0;
  //! Base test function id (x, x2, cos); coordinates are averaged.
  std::string test_fn;
  double mse = std::numeric_limits<double>::quiet_NaN();
  int trials_ok = 0;
  int trials_failed = 0;
  double mean_ksd = std::numeric_limits<double>::quiet_NaN();
};

struct ExperimentResult
{
  std::vector<ExperimentRecord> records;
  std::vector<SummaryRow> summary;
  //! Trials in which a Stein scheme had larger KSD than uniform or exact IS.
  int dominance_violations = 0;
  int dominance_checks = 0;
};

inline std::string base_test_fn(const std::string& id)
{
  return id.substr(0, id.find(':'));
}

//! Mean squared error per (scheme, n, base test function); scheme order
//! follows the first appearance in `records`.
inline std::vector<SummaryRow> summarize(const std::vector<ExperimentRecord>& records)
{
  struct Acc
  {
    double sq_sum = 0.0;
    double ksd_sum = 0.0;
    int count = 0;
    std::map<int, bool> trials_ok;
  };
  std::vector<std::string> scheme_order;
  std::vector<std::string> fn_order;
  std::map<std::tuple<std::string, int, std::string>, Acc> acc;
  // Per trial, average over coordinates first, then over trials.
  std::map<std::tuple<std::string, int, std::string, int>, std::pair<double, int>> per_trial;
  std::map<std::tuple<std::string, int, std::string, int>, double> trial_ksd;
  for (const auto& r : records) {
    if (std::find(scheme_order.begin(), scheme_order.end(), r.scheme) == scheme_order.end()) {
      scheme_order.push_back(r.scheme);
    }
    const std::string fn = base_test_fn(r.test_fn);
    if (std::find(fn_order.begin(), fn_order.end(), fn) == fn_order.end()) {
      fn_order.push_back(fn);
    }
    auto& a = acc[{ r.scheme, r.n, fn }];
    if (!r.ok()) {
      a.trials_ok[r.trial] = false;
      continue;
    }
    if (!a.trials_ok.contains(r.trial)) {
      a.trials_ok[r.trial] = true;
    }
    auto& t = per_trial[{ r.scheme, r.n, fn, r.trial }];
    t.first += r.sq_error;
    t.second += 1;
    trial_ksd[{ r.scheme, r.n, fn, r.trial }] = r.ksd;
  }
  for (const auto& [key, t] : per_trial) {
    const auto& [scheme, n, fn, trial] = key;
    auto& a = acc[{ scheme, n, fn }];
    if (!a.trials_ok[trial]) {
      continue;
    }
    a.sq_sum += t.first / t.second;
    a.ksd_sum += trial_ksd[key];
    a.count += 1;
  }
  std::vector<int> ns;
  for (const auto& r : records) {
    if (std::find(ns.begin(), ns.end(), r.n) == ns.end()) {
      ns.push_back(r.n);
    }
  }
  std::sort(ns.begin(), ns.end());
  std::vector<SummaryRow> out;
  for (const auto& scheme : scheme_order) {
    for (const int n : ns) {
      for (const auto& fn : fn_order) {
        const auto it = acc.find({ scheme, n, fn });
        if (it == acc.end()) {
          continue;
        }
        const Acc& a = it->second;
        SummaryRow row{ scheme, n, fn };
        row.trials_ok = a.count;
        row.trials_failed = static_cast<int>(a.trials_ok.size()) - a.count;
        if (a.count > 0) {
          row.mse = a.sq_sum / a.count;
          row.mean_ksd = a.ksd_sum / a.count;
        }
        out.push_back(row);
      }
    }
  }
  return out;
}

//! Parallelism degree from BBIS_THREADS (0 or unset = hardware concurrency).
inline unsigned thread_count_from_env()
{
  unsigned threads = 0;
  if (const char* env = std::getenv("BBIS_THREADS")) {
    threads = static_cast<unsigned>(std::strtoul(env, nullptr, 10));
  }
  if (threads == 0) {
    threads = std::max(1U, std::thread::hardware_concurrency());
  }
  return threads;
}

namespace detail {

struct SchemeOutcome
{
  Eigen::VectorXd weights;
  double ksd = 0.0;
  int iterations = 0;
  double wall_ms = 0.0;
  std::string error;
};

inline SchemeOutcome run_scheme(const SchemeConfig& scheme,
                                const ExperimentSetup& setup,
                                const PointSet& points,
                                const SteinGram* gram)
{
  SchemeOutcome out;
  const auto start = std::chrono::steady_clock::now();
  try {
    switch (scheme.kind) {
      case SchemeKind::uniform:
        out.weights = weights_uniform(points.rows());
        break;
      case SchemeKind::exact_is:
        if (!setup.proposal_log_density) {
          throw ArgumentError("exact IS needs a known proposal density");
        }
        out.weights = weights_exact_is(setup.target, setup.proposal_log_density, points);
        break;
      case SchemeKind::stein: {
        if (!gram) {
          throw DegenerateBandwidthError("no Stein Gram matrix for this point set");
        }
        const QpSolution sol = solve(QpProblem(*gram, scheme.lower_bound), scheme.method, scheme.qp);
        out.weights = sol.weights;
        out.iterations = sol.iterations;
        break;
      }
      case SchemeKind::control_functional:
      case SchemeKind::control_functional_normalized: {
        if (!gram) {
          throw DegenerateBandwidthError("no Stein Gram matrix for this point set");
        }
        const double lambda =
          std::isnan(scheme.cf_lambda) ? control_functional_default_lambda(*gram) : scheme.cf_lambda;
        out.weights = weights_control_functional(
          *gram, lambda, scheme.kind == SchemeKind::control_functional_normalized);
        break;
      }
      case SchemeKind::kde:
      case SchemeKind::kde_normalized:
        out.weights = weights_kde(setup.target, points, scheme.kind == SchemeKind::kde_normalized);
        break;
    }
    out.ksd = gram ? ksd_weighted(*gram, out.weights) : std::numeric_limits<double>::quiet_NaN();
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  out.wall_ms =
    std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

struct TrialOutput
{
  // Indexed [scheme][test function row].
  std::vector<std::vector<ExperimentRecord>> records;
  int dominance_checks = 0;
  int dominance_violations = 0;
};

inline bool dominated(double stein_ksd, double reference_ksd)
{
  return stein_ksd <= reference_ksd + 1e-12 * std::abs(reference_ksd);
}

inline TrialOutput run_trial(const ExperimentConfig& config,
                             const ExperimentSetup& setup,
                             int n_index,
                             int trial)
{
  const int n = config.n_grid[static_cast<std::size_t>(n_index)];
  const std::uint64_t stream =
    derive_stream(config.seed, static_cast<std::uint64_t>(n_index), static_cast<std::uint64_t>(trial));
  const PointSet points = setup.sampler(n, derive_stream(stream, 1));

  Rng fn_rng(derive_stream(stream, 2));
  std::vector<TestFunction> functions;
  for (const auto kind : config.test_functions) {
    functions.push_back(kind == TestFunctionKind::random_cosine
                          ? TestFunction::random_cosine(fn_rng, setup.target.dimension)
                          : TestFunction{ kind, {}, 0.0 });
  }

  std::optional<SteinGram> gram;
  std::string gram_error;
  if (config.needs_gram()) {
    try {
      gram = stein_gram(setup.target, KernelSpec(median_heuristic_bandwidth(points)), points);
    } catch (const std::exception& e) {
      gram_error = e.what();
    }
  }

  TrialOutput out;
  std::vector<SchemeOutcome> outcomes;
  for (const auto& scheme : config.schemes) {
    outcomes.push_back(run_scheme(scheme, setup, points, gram ? &*gram : nullptr));
    if (!gram && config.needs_gram()) {
      outcomes.back().error = gram_error;
    }
  }

  if (gram) {
    const double uniform_ksd = ksd_weighted(*gram, weights_uniform(n));
    std::optional<double> exact_ksd;
    if (setup.proposal_log_density) {
      try {
        exact_ksd = ksd_weighted(*gram, weights_exact_is(setup.target, setup.proposal_log_density, points));
      } catch (const std::exception&) {
      }
    }
    for (std::size_t s = 0; s < config.schemes.size(); ++s) {
      if (config.schemes[s].kind != SchemeKind::stein || !outcomes[s].error.empty()) {
        continue;
      }
      ++out.dominance_checks;
      bool ok = dominated(outcomes[s].ksd, uniform_ksd);
      if (exact_ksd) {
        ok = ok && dominated(outcomes[s].ksd, *exact_ksd);
      }
      if (!ok) {
        ++out.dominance_violations;
      }
    }
  }

  std::vector<Eigen::MatrixXd> values;
  std::vector<Eigen::VectorXd> truths;
  for (const auto& f : functions) {
    values.push_back(test_function_eval(f, points));
    truths.push_back(test_function_truth(f, setup.truth));
  }

  for (std::size_t s = 0; s < config.schemes.size(); ++s) {
    const SchemeOutcome& o = outcomes[s];
    std::vector<ExperimentRecord> rows;
    for (std::size_t f = 0; f < functions.size(); ++f) {
      const bool scalar = functions[f].kind == TestFunctionKind::random_cosine;
      for (Eigen::Index k = 0; k < values[f].cols(); ++k) {
        ExperimentRecord r;
        r.scheme = config.schemes[s].name();
        r.n = n;
        r.trial = trial;
        r.test_fn = to_string(functions[f].kind) + (scalar ? "" : ":" + std::to_string(k));
        r.truth = truths[f][k];
        r.iterations = o.iterations;
        r.wall_ms = config.record_wall_time ? o.wall_ms : 0.0;
        if (o.error.empty()) {
          r.estimate = o.weights.dot(values[f].col(k));
          r.sq_error = (r.estimate - r.truth) * (r.estimate - r.truth);
          r.ksd = o.ksd;
          if (!std::isfinite(r.estimate)) {
            r.status = "failed";
            r.message = "non-finite estimate";
          }
        } else {
          r.status = "failed";
          r.message = o.error;
        }
        rows.push_back(std::move(r));
      }
    }
    out.records.push_back(std::move(rows));
  }
  return out;
}

} // namespace detail

//! Runs every (n, trial) cell, all schemes on the same points. Records come
//! back in canonical order (scheme as listed in the config, n, trial, test
//! function) whatever the thread count.
inline ExperimentResult run_experiment(const ExperimentConfig& config,
                                       const ExperimentSetup& setup,
                                       unsigned threads = 0)
{
  config.validate();
  if (threads == 0) {
    threads = thread_count_from_env();
  }
  const int cells = static_cast<int>(config.n_grid.size()) * config.trials;
  std::vector<detail::TrialOutput> outputs(static_cast<std::size_t>(cells));
  std::vector<std::string> errors(static_cast<std::size_t>(cells));
  std::atomic<int> next{ 0 };
  auto worker = [&]() {
    for (int cell = next++; cell < cells; cell = next++) {
      try {
        outputs[static_cast<std::size_t>(cell)] =
          detail::run_trial(config, setup, cell / config.trials, cell % config.trials);
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(cell)] = e.what();
      }
    }
  };
  const unsigned used = std::min<unsigned>(threads, static_cast<unsigned>(cells));
  if (used <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < used; ++t) {
      pool.emplace_back(worker);
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) {
      // Sampler and setup failures are configuration errors.
      throw ArgumentError("experiment aborted: " + e);
    }
  }

  ExperimentResult result;
  for (std::size_t s = 0; s < config.schemes.size(); ++s) {
    for (int cell = 0; cell < cells; ++cell) {
      const auto& rows = outputs[static_cast<std::size_t>(cell)].records[s];
      result.records.insert(result.records.end(), rows.begin(), rows.end());
    }
  }
  for (const auto& o : outputs) {
    result.dominance_checks += o.dominance_checks;
    result.dominance_violations += o.dominance_violations;
  }
  result.summary = summarize(result.records);
  return result;
}

inline ExperimentResult run_experiment(const ExperimentConfig& config, unsigned threads = 0)
{
  config.validate();
  return run_experiment(config, build_setup(config), threads);
}

// ---------------------------------------------------------------------------
// Rate fit
// ---------------------------------------------------------------------------

struct RateFit
{
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  int points_used = 0;
  //! Grid points dropped for non-positive or missing MSE.
  int excluded = 0;
};

//! Least-squares slope of log(MSE) against log(n).
inline RateFit rate_fit(const std::vector<SummaryRow>& summary,
                        const std::string& scheme,
                        const std::string& test_fn)
{
  std::vector<double> xs;
  std::vector<double> ys;
  RateFit fit;
  for (const auto& row : summary) {
    if (row.scheme != scheme || row.test_fn != test_fn) {
      continue;
    }
    if (!(row.mse > 0.0) || !std::isfinite(row.mse)) {
      ++fit.excluded;
      continue;
    }
    xs.push_back(std::log(static_cast<double>(row.n)));
    ys.push_back(std::log(row.mse));
  }
  const auto m = static_cast<double>(xs.size());
  if (xs.size() < 3) {
    throw ArgumentError("rate fit needs at least 3 grid points with positive MSE");
  }
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - fit.intercept - fit.slope * xs[i];
    rss += r * r;
  }
  fit.slope_stderr = std::sqrt(rss / (m - 2.0) / sxx);
  fit.points_used = static_cast<int>(xs.size());
  return fit;
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

inline std::string format_double(double v)
{
  if (std::isnan(v)) {
    return "nan";
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_records_csv(std::ostream& out, const std::vector<ExperimentRecord>& records)
{
  out << "scheme,n,trial,test_fn,estimate,sq_error,ksd,iterations,wall_ms,status\n";
  for (const auto& r : records) {
    out << r.scheme << ',' << r.n << ',' << r.trial << ',' << r.test_fn << ','
        << format_double(r.estimate) << ',' << format_double(r.sq_error) << ','
        << format_double(r.ksd) << ',' << r.iterations << ',' << format_double(r.wall_ms) << ','
        << r.status << '\n';
  }
}

inline void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& summary)
{
  out << "scheme,n,test_fn,mse,trials_ok,trials_failed,mean_ksd\n";
  for (const auto& s : summary) {
    out << s.scheme << ',' << s.n << ',' << s.test_fn << ',' << format_double(s.mse) << ','
        << s.trials_ok << ',' << s.trials_failed << ',' << format_double(s.mean_ksd) << '\n';
  }
}

} // namespace bbis
