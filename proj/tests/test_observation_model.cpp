#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "fixtures.hpp"
#include "roamtok/observation_model.hpp"

using namespace roamtok;
using roamtok::testing::mat;
using roamtok::testing::vec;

namespace {

// Independent reference: explicit inverse via full-pivot LU, entrywise sums.
Matrix reference_b(const Matrix& h, const Matrix& c) {
  const Matrix cinv = c.fullPivLu().inverse();
  Matrix b = Matrix::Zero(h.cols(), h.cols());
  for (Eigen::Index p = 0; p < h.cols(); ++p)
    for (Eigen::Index q = 0; q < h.cols(); ++q)
      for (Eigen::Index r = 0; r < h.rows(); ++r)
        for (Eigen::Index s = 0; s < h.rows(); ++s) b(p, q) += h(r, p) * cinv(r, s) * h(s, q);
  return b;
}

}  // namespace

TEST(AgentModel, CachesInformationMatrix) {
  const Matrix h = mat({{1.0, 2.0, -1.0}, {0.5, 0.0, 3.0}});
  const Matrix c = mat({{2.0, 0.3}, {0.3, 1.0}});
  AgentModel a(0, h, c);
  EXPECT_LE(relative_frobenius(a.B(), reference_b(h, c)), 1e-12);
  EXPECT_TRUE(is_symmetric(a.B()));
}

TEST(AgentModel, RejectsBadCovariance) {
  EXPECT_THROW(AgentModel(0, mat({{1.0}}), mat({{0.0}})), InvalidModel);
  EXPECT_THROW(AgentModel(0, mat({{1.0}}), mat({{-1.0}})), InvalidModel);
  EXPECT_THROW(AgentModel(0, mat({{1.0}, {1.0}}), mat({{1.0, 2.0}, {0.0, 1.0}})), InvalidModel);
  EXPECT_THROW(AgentModel(0, mat({{1.0, 0.0}}), mat({{1.0, 0.0}, {0.0, 1.0}})), InvalidModel);
}

TEST(FisherInformation, SingleScalarAgent) {
  std::vector<AgentModel> agents{AgentModel(0, mat({{1.0}}), mat({{1.0}}))};
  const Matrix s = fisher_information(agents);
  EXPECT_DOUBLE_EQ(s(0, 0), 1.0);
}

TEST(FisherInformation, OrthogonalRowsGiveIdentity) {
  std::vector<AgentModel> agents{AgentModel(0, mat({{1.0, 0.0}}), mat({{1.0}})),
                                 AgentModel(1, mat({{0.0, 1.0}}), mat({{1.0}}))};
  EXPECT_LE((fisher_information(agents) - Matrix::Identity(2, 2)).norm(), 1e-15);
}

TEST(FisherInformation, MatchesTermByTermSum) {
  Rng rng(7);
  std::vector<AgentModel> agents;
  Matrix expect = Matrix::Zero(2, 2);
  for (std::size_t i = 0; i < 3; ++i) {
    Matrix h(1, 2);
    h << standard_normal(rng), standard_normal(rng);
    const Matrix c = mat({{0.5 + uniform01(rng)}});
    expect += reference_b(h, c);
    agents.emplace_back(i, h, c);
  }
  EXPECT_LE(relative_frobenius(fisher_information(agents), expect), 1e-12);
}

TEST(FisherInformation, SingularThrows) {
  std::vector<AgentModel> agents{AgentModel(0, mat({{1.0, 1.0}}), mat({{1.0}})),
                                 AgentModel(1, mat({{2.0, 2.0}}), mat({{1.0}}))};
  EXPECT_THROW(fisher_information(agents), SingularModel);
  EXPECT_THROW(GlobalModel(agents, vec({1.0, 1.0})), SingularModel);
}

TEST(GlobalModel, ValidatesShapes) {
  std::vector<AgentModel> agents{AgentModel(0, mat({{1.0, 0.0}}), mat({{1.0}}))};
  EXPECT_THROW(GlobalModel(agents, vec({1.0, 2.0, 3.0})), InvalidModel);
  std::vector<AgentModel> misnumbered{AgentModel(1, mat({{1.0}}), mat({{1.0}}))};
  EXPECT_THROW(GlobalModel(misnumbered, vec({1.0})), InvalidModel);
  EXPECT_THROW(GlobalModel({}, vec({1.0})), InvalidModel);
}

TEST(GlobalModel, SigmaIsSymmetricPositiveDefinite) {
  const auto m = roamtok::testing::ref5_model();
  EXPECT_TRUE(is_symmetric(m.sigma_c()));
  EXPECT_GT(min_eigenvalue(m.sigma_c()), 0.0);
  Matrix sum = Matrix::Zero(2, 2);
  for (const auto& a : m.agents()) sum += a.B();
  EXPECT_LE(relative_frobenius(m.sigma_c(), sum), 1e-12);
  EXPECT_NEAR(m.fisher_inverse_trace(), m.sigma_c().fullPivLu().inverse().trace(), 1e-12);
}

TEST(GlobalModel, FloorIsConfigurable) {
  std::vector<AgentModel> agents{AgentModel(0, mat({{1e-4}}), mat({{1.0}}))};
  EXPECT_NO_THROW(GlobalModel(agents, vec({1.0})));
  EXPECT_THROW(GlobalModel(agents, vec({1.0}), NoiseKind::Gaussian, 1e-6), SingularModel);
}

TEST(Measurements, ZeroNoiseIsExact) {
  const auto m = roamtok::testing::ref5_model(NoiseKind::None);
  Rng rng(1);
  const auto b = sample_measurements(m, 3, rng);
  ASSERT_EQ(b.y.size(), 5u);
  EXPECT_EQ(b.t, 3);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(b.y[i], m.agent(i).H() * m.theta());
}

TEST(Measurements, ScalarMeanWithinClt) {
  std::vector<AgentModel> agents{AgentModel(0, mat({{1.0}}), mat({{1.0}}))};
  GlobalModel m(agents, vec({2.0}));
  Rng rng(11);
  const int draws = 100000;
  double sum = 0.0;
  for (int k = 0; k < draws; ++k) sum += sample_measurements(m, k, rng).y[0][0];
  EXPECT_NEAR(sum / draws, 2.0, 3.0 / std::sqrt(static_cast<double>(draws)));
}

class NoiseCovariance : public ::testing::TestWithParam<NoiseKind> {};

TEST_P(NoiseCovariance, MatchesDeclaredCovariance) {
  const Matrix c = mat({{2.0, 0.6}, {0.6, 1.0}});
  AgentModel a(0, mat({{1.0}, {1.0}}), c);
  Rng rng(5);
  const int draws = 100000;
  Matrix acc = Matrix::Zero(2, 2);
  Vector mean = Vector::Zero(2);
  Vector w;
  for (int k = 0; k < draws; ++k) {
    sample_noise(a, GetParam(), rng, w);
    acc += w * w.transpose();
    mean += w;
  }
  acc /= draws;
  mean /= draws;
  EXPECT_LE(relative_frobenius(acc, c), 0.05);
  EXPECT_LE(mean.norm(), 0.03);
}

INSTANTIATE_TEST_SUITE_P(Kinds, NoiseCovariance,
                         ::testing::Values(NoiseKind::Gaussian, NoiseKind::Uniform));

TEST(CentralEstimate, IdentityModelReturnsMean) {
  std::vector<AgentModel> agents{AgentModel(0, Matrix::Identity(2, 2), Matrix::Identity(2, 2))};
  GlobalModel m(agents, vec({1.0, 2.0}));
  const std::vector<Vector> ybar{vec({0.3, -0.7})};
  EXPECT_LE((central_estimate(m, ybar) - ybar[0]).norm(), 1e-14);
}

TEST(CentralEstimate, ZeroNoiseRecoversTheta) {
  const auto m = roamtok::testing::ref5_model(NoiseKind::None);
  Rng rng(2);
  std::vector<Vector> sums(m.n());
  for (auto& s : sums) s = Vector::Zero(1);
  for (int t = 0; t < 7; ++t) {
    const auto b = sample_measurements(m, t, rng);
    for (std::size_t i = 0; i < m.n(); ++i) sums[i] += b.y[i];
  }
  for (auto& s : sums) s /= 7.0;
  EXPECT_LE((central_estimate(m, sums) - m.theta()).norm(), 1e-10);
}

TEST(CentralEstimate, LinearInRunningMeans) {
  const auto m = roamtok::testing::ref5_model();
  Rng rng(3);
  std::vector<Vector> ybar(m.n()), scaled(m.n());
  for (std::size_t i = 0; i < m.n(); ++i) {
    ybar[i] = vec({standard_normal(rng)});
    scaled[i] = -2.5 * ybar[i];
  }
  const Vector a = central_estimate(m, ybar);
  const Vector b = central_estimate(m, scaled);
  EXPECT_LE((b + 2.5 * a).norm(), 1e-12 * (1.0 + a.norm()));
}

TEST(CentralEstimate, RejectsWrongSizes) {
  const auto m = roamtok::testing::ref5_model();
  std::vector<Vector> few(2, vec({1.0}));
  EXPECT_THROW(central_estimate(m, few), InvalidModel);
}

TEST(GaussianRowsModel, ShapesAndDeterminism) {
  Rng r1(9), r2(9);
  const auto a = make_gaussian_rows_model(20, Vector::LinSpaced(5, 1, 5), 1.0, r1);
  const auto b = make_gaussian_rows_model(20, Vector::LinSpaced(5, 1, 5), 1.0, r2);
  EXPECT_EQ(a.n(), 20u);
  EXPECT_EQ(a.dim(), 5);
  for (std::size_t i = 0; i < 20; ++i) {
    EXPECT_EQ(a.agent(i).rows(), 1);
    EXPECT_EQ(a.agent(i).H(), b.agent(i).H());
    EXPECT_DOUBLE_EQ(a.agent(i).C()(0, 0), 1.0);
  }
}
