#include "test_support.hpp"

#include <bbis/io.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace bbis;

namespace {

std::filesystem::path scratch_dir()
{
  const auto dir = std::filesystem::temp_directory_path() / "bbis_test_io";
  std::filesystem::create_directories(dir);
  return dir;
}

} // namespace

TEST(PointsCsv, RoundTripIsExact)
{
  std::mt19937_64 rng(51);
  const PointSet pts = bbis::testing::random_points(rng, 17, 3, 1e3);
  for (const bool header : { true, false }) {
    std::stringstream s;
    write_points_csv(s, pts, header);
    EXPECT_EQ(read_points_csv(s), pts);
  }
}

TEST(PointsCsv, Errors)
{
  std::stringstream ragged("x0,x1\n1,2\n3\n");
  EXPECT_THROW(read_points_csv(ragged), ArgumentError);
  std::stringstream empty("x0,x1\n");
  EXPECT_THROW(read_points_csv(empty), ArgumentError);
  std::stringstream junk("1,2\n3,abc\n");
  EXPECT_THROW(read_points_csv(junk), ArgumentError);
  EXPECT_THROW(read_points_csv(std::string("/nonexistent/points.csv")), ArgumentError);
}

TEST(WeightsCsv, RoundTripAndIndexCheck)
{
  const Eigen::VectorXd w = Eigen::Vector3d(0.25, -0.125, 0.875);
  std::stringstream s;
  write_weights_csv(s, w);
  EXPECT_EQ(read_weights_csv(s), w);
  std::stringstream shuffled("index,weight\n1,0.5\n0,0.5\n");
  EXPECT_THROW(read_weights_csv(shuffled), ArgumentError);
}

TEST(ProbitCsv, RoundTrip)
{
  const ProbitModel m = probit_simulate(25, 3, 9, Eigen::Vector3d(0.5, -1.0, 0.25));
  std::stringstream s;
  write_probit_csv(s, m);
  const ProbitModel back = read_probit_csv(s, 0.1);
  EXPECT_EQ(back.features, m.features);
  EXPECT_EQ(back.labels, m.labels);
  std::stringstream bad("f0,label\n0.5,2\n");
  EXPECT_THROW(read_probit_csv(bad), ArgumentError);
  std::stringstream headless("0.5,1\n");
  EXPECT_THROW(read_probit_csv(headless), ArgumentError);
}

TEST(MixtureJson, RoundTrip)
{
  const GaussianMixture m = mixture_fixture();
  const GaussianMixture back = mixture_from_json(json::parse(mixture_to_json(m).dump()));
  EXPECT_EQ(back.weights, m.weights);
  EXPECT_EQ(back.means, m.means);
  EXPECT_EQ(back.variances, m.variances);
  EXPECT_THROW(mixture_from_json(json::parse(R"({"weights":[1],"means":[[0]]})")), ArgumentError);
  EXPECT_THROW(mixture_from_json(json::parse(R"({"weights":[0.5,0.5],"means":[[0],[1,2]],"variances":[1,1]})")),
               ArgumentError);
}

TEST(TargetSpec, Parses)
{
  TargetConfig t = parse_target_spec("gaussian:d=5");
  EXPECT_EQ(t.kind, "gaussian");
  EXPECT_EQ(t.dimension, 5);
  t = parse_target_spec("gmm");
  EXPECT_EQ(t.kind, "gmm");
  EXPECT_FALSE(t.mixture.has_value());
  t = parse_target_spec("gmm:fixture=mixture20");
  EXPECT_EQ(t.kind, "gmm");
  t = parse_target_spec("gmm_interp:lambda=0.25");
  EXPECT_EQ(t.lambda, 0.25);
  t = parse_target_spec("probit:n_data=40,d=3,seed=9,prior_var=0.5");
  EXPECT_EQ(t.n_data, 40);
  EXPECT_EQ(t.dimension, 3);
  EXPECT_EQ(t.data_seed, 9u);
  EXPECT_EQ(t.prior_variance, 0.5);

  const auto dir = scratch_dir();
  {
    std::ofstream f(dir / "mix.json");
    f << mixture_to_json(random_mixture(3, 4, 1)).dump();
    std::ofstream g(dir / "data.csv");
    write_probit_csv(g, probit_simulate(12, 2, 1, Eigen::Vector2d(1.0, 0.0)));
  }
  t = parse_target_spec("gmm:file=mix.json", dir);
  ASSERT_TRUE(t.mixture.has_value());
  EXPECT_EQ(t.mixture->dimension(), 4);
  EXPECT_EQ(build_target(t).dimension, 4);
  t = parse_target_spec("probit:data=data.csv", dir);
  ASSERT_TRUE(t.probit.has_value());
  EXPECT_EQ(t.dimension, 2);
  EXPECT_EQ(t.probit->size(), 12);
}

TEST(TargetSpec, Errors)
{
  EXPECT_THROW(parse_target_spec("banana"), ArgumentError);
  EXPECT_THROW(parse_target_spec("gaussian:dim=2"), ArgumentError);
  EXPECT_THROW(parse_target_spec("gaussian:d"), ArgumentError);
  EXPECT_THROW(parse_target_spec("gaussian:d=two"), ArgumentError);
  EXPECT_THROW(parse_target_spec("gmm:fixture=fig7"), ArgumentError);
  EXPECT_THROW(parse_target_spec("gmm:lambda=0.5"), ArgumentError);
  EXPECT_THROW(parse_target_spec("gmm_interp"), ArgumentError);
  EXPECT_THROW(parse_target_spec("probit:data=/nonexistent.csv"), ArgumentError);
}

TEST(ConfigJson, ParsesEveryShippedConfig)
{
  const std::filesystem::path dir = std::filesystem::path(BBIS_SOURCE_DIR) / "configs";
  int count = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".json") {
      continue;
    }
    SCOPED_TRACE(entry.path().string());
    const ExperimentConfig c = read_config(entry.path().string());
    EXPECT_NO_THROW(c.validate());
    EXPECT_FALSE(c.output.empty());
    ++count;
  }
  EXPECT_GE(count, 7);
}

TEST(ConfigJson, Fields)
{
  const json j = json::parse(R"({
    "target": "gmm_interp:lambda=0.5",
    "sampler": {"kind": "mala", "steps": 4, "step_size": 0.2, "init_scale": 2},
    "schemes": ["uniform", {"kind": "stein", "label": "relaxed", "lower_bound": -0.01,
                "method": "frank_wolfe", "max_iters": 50, "tol": 1e-6},
               {"kind": "control_functional", "lambda": 0.1}],
    "n_grid": [5, 10],
    "trials": 2,
    "test_functions": ["x", "cos"],
    "seed": 12,
    "compute_ksd": false
  })");
  const ExperimentConfig c = config_from_json(j);
  EXPECT_EQ(c.target.kind, "gmm_interp");
  EXPECT_EQ(c.sampler.kind, "mala");
  EXPECT_EQ(c.sampler.steps, 4);
  EXPECT_EQ(c.sampler.init_scale, 2.0);
  ASSERT_EQ(c.schemes.size(), 3u);
  EXPECT_EQ(c.schemes[1].name(), "relaxed");
  EXPECT_EQ(c.schemes[1].lower_bound, -0.01);
  EXPECT_EQ(c.schemes[1].method, QpMethod::frank_wolfe);
  EXPECT_EQ(c.schemes[1].qp.max_iters, 50);
  EXPECT_EQ(c.schemes[1].qp.tol, 1e-6);
  EXPECT_EQ(c.schemes[2].cf_lambda, 0.1);
  EXPECT_EQ(c.test_functions.size(), 2u);
  EXPECT_EQ(c.seed, 12u);
  EXPECT_FALSE(c.compute_ksd);
  EXPECT_TRUE(c.needs_gram());
}

TEST(ConfigJson, Errors)
{
  const std::string base = R"("schemes": ["uniform"], "n_grid": [5, 10])";
  auto parse = [](const std::string& text) { return config_from_json(json::parse(text)); };
  EXPECT_NO_THROW(parse(R"({"target": "gmm", )" + base + "}"));
  EXPECT_THROW(parse(R"({"target": "gmm", "colour": 1, )" + base + "}"), ArgumentError);
  EXPECT_THROW(parse(R"({"target": {"kind": "gmm", "size": 3}, )" + base + "}"), ArgumentError);
  EXPECT_THROW(parse(R"({"target": "gmm", "sampler": {"kind": "iid", "steps": 1, "x": 0}, )" + base + "}"),
               ArgumentError);
  EXPECT_THROW(parse(R"({"target": "gmm", "schemes": [{"kind": "stein", "speed": 1}], "n_grid": [5]})"),
               ArgumentError);
  EXPECT_THROW(parse(R"({"target": "gmm", "schemes": ["uniform", "uniform"], "n_grid": [5]})"), ArgumentError);
  EXPECT_THROW(parse(R"({"target": "gmm", "schemes": ["uniform"], "n_grid": [10, 5]})"), ArgumentError);
  EXPECT_THROW(parse(R"({"target": "gmm", "schemes": ["uniform"], "n_grid": "many"})"), ArgumentError);
  EXPECT_THROW(parse(R"({"schemes": ["uniform"], "n_grid": [5]})"), ArgumentError);
  EXPECT_THROW(parse(R"({"target": "gmm", "schemes": [{"kind": "stein", "method": "newton"}], "n_grid": [5]})"),
               ArgumentError);
  EXPECT_THROW(read_config("/nonexistent/config.json"), ArgumentError);
}

TEST(TruthCsv, OneRowPerKey)
{
  auto rec = [](std::string scheme, int n, int trial, double truth) {
    ExperimentRecord r;
    r.scheme = std::move(scheme);
    r.n = n;
    r.trial = trial;
    r.test_fn = "x:0";
    r.truth = truth;
    return r;
  };
  const std::vector<ExperimentRecord> recs{ rec("a", 10, 0, 0.5), rec("b", 10, 0, 0.5), rec("a", 10, 1, 0.25),
                                            rec("a", 20, 0, 0.125) };
  std::ostringstream out;
  write_truth_csv(out, recs);
  EXPECT_EQ(out.str(), "n,trial,test_fn,truth\n10,0,x:0,0.5\n10,1,x:0,0.25\n20,0,x:0,0.125\n");
}
