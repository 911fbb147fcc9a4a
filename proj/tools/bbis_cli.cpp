// Command-line front end: experiments, weights for a point file, KSD.

#include <bbis/bbis.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

// Writes to `path`, or stdout when the path is empty or "-".
template<typename Fn>
void with_output(const std::string& path, Fn&& fn)
{
  if (path.empty() || path == "-") {
    fn(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw bbis::ArgumentError("cannot write '" + path + "'");
  }
  fn(out);
}

bbis::QpMethod parse_method(const std::string& m)
{
  if (m == "mirror_descent") {
    return bbis::QpMethod::mirror_descent;
  }
  if (m == "frank_wolfe") {
    return bbis::QpMethod::frank_wolfe;
  }
  return bbis::QpMethod::automatic;
}

int run_command(const std::string& config_path, const std::string& output_override, unsigned threads)
{
  bbis::ExperimentConfig config = bbis::read_config(config_path);
  if (!output_override.empty()) {
    config.output = output_override;
  }
  if (config.output.empty()) {
    throw bbis::ArgumentError("config has no output prefix; pass --output");
  }
  const bbis::ExperimentResult result = bbis::run_experiment(config, threads);
  with_output(config.output + "_records.csv",
              [&](std::ostream& o) { bbis::write_records_csv(o, result.records); });
  with_output(config.output + "_summary.csv",
              [&](std::ostream& o) { bbis::write_summary_csv(o, result.summary); });
  with_output(config.output + "_truth.csv",
              [&](std::ostream& o) { bbis::write_truth_csv(o, result.records); });

  int failed = 0;
  for (const auto& r : result.records) {
    failed += r.ok() ? 0 : 1;
  }
  std::printf("records: %zu (%d failed)\n", result.records.size(), failed);
  std::printf("ksd dominance: %d violations in %d checks\n", result.dominance_violations,
              result.dominance_checks);
  std::printf("%-32s %-6s %10s %10s\n", "scheme", "h", "slope", "stderr");
  for (const auto& scheme : config.schemes) {
    for (const auto kind : config.test_functions) {
      const std::string fn = bbis::to_string(kind);
      try {
        const auto fit = bbis::rate_fit(result.summary, scheme.name(), fn);
        std::printf("%-32s %-6s %10.4f %10.4f\n", scheme.name().c_str(), fn.c_str(), fit.slope,
                    fit.slope_stderr);
      } catch (const bbis::ArgumentError&) {
        std::printf("%-32s %-6s %10s %10s\n", scheme.name().c_str(), fn.c_str(), "-", "-");
      }
    }
  }
  std::printf("wrote %s_{records,summary,truth}.csv\n", config.output.c_str());
  return 0;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{ "Black-box importance weights by kernelized Stein discrepancy" };
  app.require_subcommand(1);

  std::string config_path;
  std::string output;
  unsigned threads = 0;
  auto* run = app.add_subcommand("run", "Run an experiment config (JSON)");
  run->add_option("--config", config_path, "Experiment config")->required()->check(CLI::ExistingFile);
  run->add_option("--output", output, "Output prefix (overrides the config)");
  run->add_option("--threads", threads, "Worker threads (0 = BBIS_THREADS or all cores)");

  std::string points_path;
  std::string target_spec;
  std::string scheme = "stein";
  double lower_bound = 0.0;
  std::string method = "automatic";
  int max_iters = 0;
  double bandwidth = 0.0;
  std::string proposal_path;
  std::string weights_out;
  auto* weights = app.add_subcommand("weights", "Importance weights for a point file");
  weights->add_option("--points", points_path, "Point CSV, one point per row")->required()->check(CLI::ExistingFile);
  weights->add_option("--target", target_spec, "Target spec, e.g. gaussian:d=2")->required();
  weights->add_option("--scheme", scheme, "Weighting scheme")->check(CLI::IsMember(
    { "uniform", "exact_is", "stein", "control_functional", "control_functional_normalized", "kde",
      "kde_normalized" }));
  weights->add_option("--lower-bound", lower_bound, "Lower bound on each Stein weight");
  weights->add_option("--method", method, "QP solver")->check(
    CLI::IsMember({ "automatic", "mirror_descent", "frank_wolfe" }));
  weights->add_option("--max-iters", max_iters, "QP iteration cap (0 = 50 n)");
  weights->add_option("--bandwidth", bandwidth, "RBF bandwidth h (0 = median heuristic)");
  weights->add_option("--proposal", proposal_path, "Proposal mixture JSON (exact_is)");
  weights->add_option("--output", weights_out, "Weight CSV (default stdout)");

  std::string weights_path;
  auto* ksd = app.add_subcommand("ksd", "Empirical weighted KSD of a point file");
  ksd->add_option("--points", points_path, "Point CSV")->required()->check(CLI::ExistingFile);
  ksd->add_option("--weights", weights_path, "Weight CSV (index,weight)")->required()->check(CLI::ExistingFile);
  ksd->add_option("--target", target_spec, "Target spec")->required();
  ksd->add_option("--bandwidth", bandwidth, "RBF bandwidth h (0 = median heuristic)");

  std::string sampler = "iid";
  int n = 100;
  int steps = 100;
  double step_size = 0.1;
  double init_scale = 1.0;
  int minibatch = 0;
  std::uint64_t seed = 0;
  auto* sample = app.add_subcommand("sample", "Draw a point set");
  sample->add_option("--target", target_spec, "Target spec")->required();
  sample->add_option("--sampler", sampler, "iid | mala | sgld")->check(CLI::IsMember({ "iid", "mala", "sgld" }));
  sample->add_option("-n,--n", n, "Number of points (chains)");
  sample->add_option("--steps", steps, "Chain steps");
  sample->add_option("--step-size", step_size, "Chain step size");
  sample->add_option("--init-scale", init_scale, "Chains start from init_scale * N(0, I)");
  sample->add_option("--minibatch", minibatch, "SGLD mini-batch (0 = all data)");
  sample->add_option("--seed", seed, "Seed");
  sample->add_option("--output", output, "Point CSV (default stdout)");

  int n_data = 100;
  int dimension = 10;
  double prior_variance = 0.1;
  auto* simulate = app.add_subcommand("simulate-probit", "Simulate a probit data set");
  simulate->add_option("--n-data", n_data, "Observations");
  simulate->add_option("-d,--dimension", dimension, "Features");
  simulate->add_option("--prior-var", prior_variance, "Prior variance of the true coefficients");
  simulate->add_option("--seed", seed, "Seed");
  simulate->add_option("--output", output, "Data CSV (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      return run_command(config_path, output, threads);
    }
    if (weights->parsed() || ksd->parsed()) {
      const bbis::TargetConfig tc = bbis::parse_target_spec(target_spec);
      const bbis::ScoreTarget target = bbis::build_target(tc);
      const bbis::PointSet points = bbis::read_points_csv(points_path);
      const double h = bandwidth > 0.0 ? bandwidth : bbis::median_heuristic_bandwidth(points);
      const bbis::SteinGram gram = bbis::stein_gram(target, bbis::KernelSpec(h), points);
      if (ksd->parsed()) {
        const Eigen::VectorXd w = bbis::read_weights_csv(weights_path);
        if (w.size() != points.rows()) {
          throw bbis::ArgumentError("weight count does not match the number of points");
        }
        std::printf("%s\n", bbis::format_double(bbis::ksd_weighted(gram, w)).c_str());
        return 0;
      }
      bbis::ExperimentSetup setup;
      setup.target = target;
      if (!proposal_path.empty()) {
        const auto q = bbis::read_mixture_json(proposal_path);
        setup.proposal_log_density = [q](const bbis::PointRef& x) { return bbis::gmm_log_density(q, x); };
      }
      bbis::SchemeConfig sc;
      sc.kind = bbis::scheme_from_string(scheme);
      sc.lower_bound = lower_bound;
      sc.method = parse_method(method);
      sc.qp.max_iters = max_iters;
      const auto outcome = bbis::detail::run_scheme(sc, setup, points, &gram);
      if (!outcome.error.empty()) {
        throw std::runtime_error(outcome.error);
      }
      with_output(weights_out, [&](std::ostream& o) { bbis::write_weights_csv(o, outcome.weights); });
      std::fprintf(stderr, "ksd %s  ess %.3f\n", bbis::format_double(outcome.ksd).c_str(),
                   bbis::effective_sample_size(outcome.weights));
      return 0;
    }
    if (sample->parsed()) {
      bbis::ExperimentConfig config;
      config.target = bbis::parse_target_spec(target_spec);
      config.target.truth_draws = 1;
      config.target.truth_burn_in = 0;
      config.sampler = { sampler, std::nullopt, steps, step_size, init_scale, minibatch };
      const bbis::ExperimentSetup setup = bbis::build_setup(config);
      const bbis::PointSet points = setup.sampler(n, seed);
      with_output(output, [&](std::ostream& o) { bbis::write_points_csv(o, points); });
      return 0;
    }
    if (simulate->parsed()) {
      bbis::TargetConfig tc;
      tc.kind = "probit";
      tc.n_data = n_data;
      tc.dimension = dimension;
      tc.data_seed = seed;
      tc.prior_variance = prior_variance;
      const bbis::ProbitModel model = bbis::resolve_probit(tc);
      with_output(output, [&](std::ostream& o) { bbis::write_probit_csv(o, model); });
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
