#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace bbis;
using bbis::testing::random_points;

namespace {

GaussianMixture two_component_1d()
{
  GaussianMixture g;
  g.weights = Eigen::Vector2d(0.3, 0.7);
  g.means = Eigen::MatrixXd{ { -1.5 }, { 1.0 } };
  g.variances = Eigen::Vector2d(0.5, 1.2);
  return g;
}

// k_p(x, y) = div_x div_y [p(x) k(x, y) p(y)] / (p(x) p(y)), by nested
// central differences of the density-weighted kernel. Uses only the
// log-density, never the score.
double fd_stein_kernel(const ScoreTarget& t, const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y)
{
  const double e = 1e-4;
  auto g = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return std::exp(t.log_density(a) + t.log_density(b)) * kernel_eval(spec, a, b);
  };
  double acc = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Eigen::VectorXd xp = x, xm = x, yp = y, ym = y;
    xp[k] += e;
    xm[k] -= e;
    yp[k] += e;
    ym[k] -= e;
    acc += (g(xp, yp) - g(xp, ym) - g(xm, yp) + g(xm, ym)) / (4.0 * e * e);
  }
  return acc / std::exp(t.log_density(x) + t.log_density(y));
}

} // namespace

TEST(SteinKernel, StandardNormalExamples)
{
  const ScoreTarget t = make_gaussian_target(1);
  const KernelSpec spec(1.0);
  EXPECT_NEAR(stein_kernel_eval(t, spec, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)), 2.0, 1e-15);
  EXPECT_NEAR(stein_kernel_eval(t, spec, Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1)),
              -4.0 * std::exp(-1.0), 1e-15);
}

TEST(SteinKernel, ZeroScoreDiagonalIsCrossTrace)
{
  const ScoreTarget t = make_gaussian_target(3);
  const KernelSpec spec(2.5);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
  EXPECT_DOUBLE_EQ(stein_kernel_eval(t, spec, zero, zero), kernel_cross_trace(spec, zero, zero));
}

TEST(SteinKernel, MatchesDensityWeightedFiniteDifferences)
{
  std::mt19937_64 rng(11);
  const std::vector<ScoreTarget> targets{ make_gaussian_target(1), make_mixture_target(two_component_1d()),
                                          make_gaussian_target(2) };
  for (const auto& t : targets) {
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::VectorXd x = bbis::testing::random_vector(rng, t.dimension);
      const Eigen::VectorXd y = bbis::testing::random_vector(rng, t.dimension);
      const KernelSpec spec(0.5 + trial % 3);
      EXPECT_NEAR(stein_kernel_eval(t, spec, x, y), fd_stein_kernel(t, spec, x, y), 1e-5);
    }
  }
}

TEST(SteinKernel, Symmetric)
{
  std::mt19937_64 rng(12);
  const ScoreTarget t = make_mixture_target(mixture_fixture());
  for (int i = 0; i < 50; ++i) {
    const Eigen::VectorXd x = bbis::testing::random_vector(rng, 2, 3.0);
    const Eigen::VectorXd y = bbis::testing::random_vector(rng, 2, 3.0);
    EXPECT_EQ(stein_kernel_eval(t, KernelSpec(3.0), x, y), stein_kernel_eval(t, KernelSpec(3.0), y, x));
  }
}

TEST(SteinKernel, NonFiniteScoreRaisesEvaluationError)
{
  ScoreTarget t;
  t.dimension = 1;
  t.score = [](const PointRef& x) { return Eigen::VectorXd::Constant(1, 1.0 / x[0]); };
  EXPECT_THROW(stein_kernel_eval(t, KernelSpec(1.0), Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1)),
               EvaluationError);
  Eigen::MatrixXd pts{ { 1.0 }, { 2.0 }, { 0.0 }, { 3.0 } };
  try {
    stein_gram(t, KernelSpec(1.0), pts);
    FAIL() << "expected EvaluationError";
  } catch (const EvaluationError& e) {
    EXPECT_EQ(e.index(), 2U);
  }
}

TEST(SteinGram, SmallExamples)
{
  const ScoreTarget t = make_gaussian_target(1);
  const SteinGram g = stein_gram(t, KernelSpec(1.0), Eigen::MatrixXd::Zero(1, 1));
  ASSERT_EQ(g.size(), 1);
  EXPECT_NEAR(g.matrix(0, 0), 2.0, 1e-15);

  std::mt19937_64 rng(13);
  const Eigen::MatrixXd pts = random_points(rng, 5, 1);
  const SteinGram g5 = stein_gram(t, KernelSpec(1.3), pts);
  EXPECT_EQ((g5.matrix - g5.matrix.transpose()).cwiseAbs().maxCoeff(), 0.0);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      EXPECT_NEAR(g5.matrix(i, j),
                  stein_kernel_eval(t, KernelSpec(1.3), pts.row(i).transpose(), pts.row(j).transpose()), 1e-14);
    }
  }
  EXPECT_EQ(g5.points_digest, point_set_digest(pts));
  EXPECT_EQ(g5.kernel.bandwidth(), 1.3);
}

TEST(SteinGram, RejectsBadPoints)
{
  const ScoreTarget t = make_gaussian_target(2);
  EXPECT_THROW(stein_gram(t, KernelSpec(1.0), Eigen::MatrixXd(0, 2)), ArgumentError);
  EXPECT_THROW(stein_gram(t, KernelSpec(1.0), Eigen::MatrixXd::Zero(3, 1)), ArgumentError);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(3, 2);
  bad(1, 1) = std::nan("");
  EXPECT_THROW(stein_gram(t, KernelSpec(1.0), bad), ArgumentError);
}

TEST(SteinGram, PositiveSemidefiniteForBuiltInTargets)
{
  std::mt19937_64 rng(14);
  ProbitModel probit = probit_simulate(100, 10, 3, Eigen::VectorXd::Constant(10, 0.3));
  const std::vector<std::pair<ScoreTarget, PointSet>> cases{
    { make_gaussian_target(2), random_points(rng, 200, 2) },
    { make_gaussian_target(5), random_points(rng, 150, 5) },
    { make_mixture_target(mixture_fixture()), sample_gmm_iid(mixture_fixture(), 200, 1) },
    { make_mixture_target(gaussianity_interpolation(mixture_fixture(), 0.5)), random_points(rng, 200, 2, 3.0) },
    { make_probit_target(probit), random_points(rng, 100, 10, 0.3) },
  };
  for (const auto& [target, pts] : cases) {
    const SteinGram g = stein_gram(target, KernelSpec(median_heuristic_bandwidth(pts)), pts);
    const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(g.matrix).eigenvalues().minCoeff();
    EXPECT_GE(lmin, -1e-8 * g.size() * g.max_diagonal()) << target.name;
  }
}

TEST(SteinGram, IndependentOfNormalizingConstant)
{
  const GaussianMixture m = mixture_fixture();
  ScoreTarget a = make_mixture_target(m);
  ScoreTarget b = a;
  b.log_density = [m](const PointRef& x) { return gmm_log_density(m, x) + 123.0; };
  const PointSet pts = sample_gmm_iid(m, 40, 2);
  const KernelSpec spec(median_heuristic_bandwidth(pts));
  const SteinGram ga = stein_gram(a, spec, pts);
  const SteinGram gb = stein_gram(b, spec, pts);
  EXPECT_EQ((ga.matrix - gb.matrix).cwiseAbs().maxCoeff(), 0.0);
  const Eigen::VectorXd w = weights_uniform(40);
  EXPECT_EQ(ksd_weighted(ga, w), ksd_weighted(gb, w));
}

TEST(Ksd, Examples)
{
  SteinGram g{ Eigen::Matrix2d{ { 3.0, 0.5 }, { 0.5, 2.0 } } };
  EXPECT_EQ(ksd_weighted(g, Eigen::Vector2d(1.0, 0.0)), 3.0);
  EXPECT_DOUBLE_EQ(ksd_weighted(g, Eigen::Vector2d(0.5, 0.5)), (3.0 + 2 * 0.5 + 2.0) / 4.0);
  EXPECT_EQ(ksd_weighted(g, Eigen::Vector2d::Zero()), 0.0);
  EXPECT_THROW(ksd_weighted(g, Eigen::Vector3d::Ones()), ArgumentError);
}

TEST(Ksd, ClampsRoundingAndRejectsIndefiniteMatrices)
{
  SteinGram tiny{ Eigen::Matrix2d{ { 1.0, -1.0 - 1e-12 }, { -1.0 - 1e-12, 1.0 } } };
  EXPECT_EQ(ksd_weighted(tiny, Eigen::Vector2d(0.5, 0.5)), 0.0);
  SteinGram bad{ Eigen::Matrix2d{ { 1.0, -2.0 }, { -2.0, 1.0 } } };
  EXPECT_THROW(ksd_weighted(bad, Eigen::Vector2d(0.5, 0.5)), NumericalError);
}

TEST(Ksd, NonNegativeOnSimplex)
{
  std::mt19937_64 rng(15);
  const GaussianMixture m = mixture_fixture();
  const PointSet pts = sample_gmm_iid(m, 60, 4);
  const SteinGram g = stein_gram(make_mixture_target(m), KernelSpec(median_heuristic_bandwidth(pts)), pts);
  for (int t = 0; t < 500; ++t) {
    EXPECT_GE(ksd_weighted(g, bbis::testing::random_simplex_point(rng, 60)), 0.0);
  }
}

TEST(SteinIdentity, StandardNormalAndTwoComponentMixture)
{
  const QuadratureGrid grid = trapezoid_grid_1d(-10.0, 10.0, 4001);
  const std::vector<ScoreTarget> targets{ make_gaussian_target(1), make_mixture_target(two_component_1d()) };
  for (const auto& t : targets) {
    for (int i = 0; i < 21; ++i) {
      const double y = -3.0 + 0.3 * i;
      EXPECT_LT(std::abs(stein_identity_check(t, KernelSpec(1.0), Eigen::VectorXd::Constant(1, y), grid)), 1e-6);
    }
  }
}

TEST(SteinIdentity, TwoDimensionalTensorGrid)
{
  const QuadratureGrid g1 = trapezoid_grid_1d(-9.0, 9.0, 301);
  const QuadratureGrid grid = tensor_grid_2d(g1, g1);
  const ScoreTarget t = make_mixture_target(gaussianity_interpolation(mixture_fixture(), 0.6));
  EXPECT_LT(std::abs(stein_identity_check(t, KernelSpec(2.0), Eigen::Vector2d(0.5, -1.0), grid)), 1e-6);
}

TEST(SteinIdentity, Errors)
{
  const ScoreTarget t = make_gaussian_target(1);
  EXPECT_THROW(stein_identity_check(t, KernelSpec(1.0), Eigen::VectorXd::Zero(1), trapezoid_grid_1d(0.0, 0.0, 1)),
               ArgumentError);
  EXPECT_THROW(stein_identity_check(make_gaussian_target(3), KernelSpec(1.0), Eigen::VectorXd::Zero(3),
                                    trapezoid_grid_1d(-1, 1, 5)),
               ArgumentError);
  ScoreTarget score_only = t;
  score_only.log_density = nullptr;
  EXPECT_THROW(stein_identity_check(score_only, KernelSpec(1.0), Eigen::VectorXd::Zero(1), trapezoid_grid_1d(-1, 1, 5)),
               ArgumentError);
}

TEST(GramSerialization, RoundTripAndLayout)
{
  const Eigen::Matrix2d m{ { 1.5, -2.0 }, { -2.0, 1e-300 } };
  std::stringstream buf;
  write_gram_matrix(buf, m);
  const std::string bytes = buf.str();
  ASSERT_EQ(bytes.size(), 8U + 4U * 8U);
  EXPECT_EQ(static_cast<unsigned char>(bytes[0]), 2);
  for (int i = 1; i < 8; ++i) {
    EXPECT_EQ(bytes[static_cast<std::size_t>(i)], 0);
  }
  const Eigen::MatrixXd back = read_gram_matrix(buf);
  EXPECT_EQ((back - m).cwiseAbs().maxCoeff(), 0.0);
  std::stringstream truncated(bytes.substr(0, 20));
  EXPECT_THROW(read_gram_matrix(truncated), ArgumentError);
}

TEST(PointDigest, SensitiveToContentAndShape)
{
  const Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, 3);
  Eigen::MatrixXd b = a;
  b(1, 2) = 1e-300;
  EXPECT_NE(point_set_digest(a), point_set_digest(b));
  EXPECT_NE(point_set_digest(a), point_set_digest(Eigen::MatrixXd::Zero(3, 2)));
  EXPECT_EQ(point_set_digest(a), point_set_digest(Eigen::MatrixXd::Zero(2, 3)));
}
