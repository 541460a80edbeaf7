#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "fixtures.hpp"
#include "roamtok/roaming_token.hpp"
#include "roamtok/verification.hpp"

using namespace roamtok;
using roamtok::testing::directed_cycle;
using roamtok::testing::mat;
using roamtok::testing::vec;

namespace {

GlobalModel scalar_unit_model(double theta, NoiseKind noise = NoiseKind::Gaussian) {
  std::vector<AgentModel> agents{AgentModel(0, mat({{1.0}}), mat({{1.0}}))};
  return GlobalModel(std::move(agents), vec({theta}), noise);
}

}  // namespace

TEST(AlphaSchedule, Forms) {
  const auto lin = AlphaSchedule::linear();
  EXPECT_DOUBLE_EQ(lin(0), 1.0);
  EXPECT_DOUBLE_EQ(lin(9), 10.0);
  EXPECT_TRUE(lin.optimal_rate_admissible());
  const auto pw = AlphaSchedule::power(2.0, 0.75);
  EXPECT_DOUBLE_EQ(pw(15), 2.0 * std::pow(16.0, 0.75));
  EXPECT_TRUE(pw.optimal_rate_admissible());
  EXPECT_FALSE(AlphaSchedule::power(1.0, 0.5).optimal_rate_admissible());
  EXPECT_THROW(AlphaSchedule::power(0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(AlphaSchedule::power(1.0, -1.0), std::invalid_argument);
}

TEST(LocalUpdate, FirstMeasurement) {
  AgentModel a(0, mat({{1.0, 2.0}}), mat({{4.0}}));
  auto s = AgentLocalState::zero(2);
  local_update(s, a, vec({3.0}));
  EXPECT_EQ(s.k, 1);
  EXPECT_LE((s.x - vec({0.75, 1.5})).norm(), 1e-15);
}

TEST(LocalUpdate, ZeroNoiseGivesBTheta) {
  AgentModel a(0, mat({{1.0, -1.0}, {0.5, 2.0}}), mat({{1.0, 0.2}, {0.2, 2.0}}));
  const Vector theta = vec({0.3, -1.2});
  auto s = AgentLocalState::zero(2);
  for (int k = 0; k < 25; ++k) local_update(s, a, a.H() * theta);
  EXPECT_LE((s.x - a.B() * theta).norm(), 1e-12);
}

TEST(LocalUpdate, RunningMeanMatchesBatchAverage) {
  AgentModel a(0, mat({{1.0, 0.5}, {-0.3, 2.0}}), mat({{1.5, 0.4}, {0.4, 0.8}}));
  Rng rng(3);
  auto s = AgentLocalState::zero(2);
  Vector sum = Vector::Zero(2);
  for (int k = 0; k < 50; ++k) {
    const Vector y = vec({standard_normal(rng), standard_normal(rng)});
    sum += y;
    local_update(s, a, y);
  }
  const Vector want = a.H().transpose() * a.C().fullPivLu().solve(sum / 50.0);
  EXPECT_LE((s.x - want).norm(), 1e-12 * (1.0 + want.norm()));
  EXPECT_THROW(local_update(s, a, vec({1.0})), InvalidModel);
}

TEST(TokenVisit, FirstVisitAndRevisit) {
  AgentModel a(0, mat({{1.0, 1.0}}), mat({{2.0}}));
  auto state = AgentLocalState::zero(2);
  auto payload = TokenPayload::start(2, 1, 0);
  local_update(state, a, vec({4.0}));
  token_visit(payload, state, a, 0);
  EXPECT_EQ(payload.d, state.x);
  EXPECT_EQ(payload.K, a.B());
  EXPECT_EQ(payload.visited_count, 1u);
  EXPECT_EQ(state.last_visit, 0);
  const Vector d_before = payload.d;
  token_visit(payload, state, a, 1);
  EXPECT_EQ(payload.d, d_before);
  EXPECT_EQ(payload.K, a.B());
  EXPECT_EQ(state.last_visit, 1);
}

TEST(TokenVisit, WrongHolderRejected) {
  AgentModel a(1, mat({{1.0}}), mat({{1.0}}));
  auto state = AgentLocalState::zero(1);
  auto payload = TokenPayload::start(1, 2, 0);
  EXPECT_THROW(token_visit(payload, state, a, 0), std::invalid_argument);
  EXPECT_THROW(TokenPayload::start(1, 2, 2), std::out_of_range);
}

TEST(Estimate, NoVisitsIsZero) {
  const auto p = TokenPayload::start(3, 4, 0);
  EXPECT_EQ(estimate(p, AlphaSchedule::linear(), 5), Vector::Zero(3));
}

TEST(Estimate, MatchesDenseSolve) {
  const auto m = roamtok::testing::ref5_model(NoiseKind::None);
  auto p = TokenPayload::start(2, 5, 0);
  p.K = m.sigma_c();
  p.d = m.sigma_c() * m.theta();
  for (long t : {0L, 3L, 100L}) {
    const Matrix sys = Matrix::Identity(2, 2) / static_cast<double>(t + 1) + m.sigma_c();
    const Vector want = sys.fullPivLu().solve(p.d);
    EXPECT_LE((estimate(p, AlphaSchedule::linear(), t) - want).norm(), 1e-10);
  }
}

TEST(RunEpisode, SingleAgentClosedForm) {
  const auto m = scalar_unit_model(2.0);
  GraphProcessSpec spec(StaticGraph{Adjacency(1)});
  TrialStreams streams = TrialStreams::derive(5, 0);
  Rng noise = make_rng(5, 0, Stream::Noise);
  const auto tr = run_episode(m, spec, TransitionRule::out_degree_reciprocal(),
                              AlphaSchedule::linear(), 30, 0, {}, streams);
  double sum = 0.0;
  for (long t = 0; t <= 30; ++t) {
    sum += sample_measurements(m, t, noise).y[0][0];
    const double mean = sum / static_cast<double>(t + 1);
    const double s = mean / (1.0 / static_cast<double>(t + 1) + 1.0);
    EXPECT_NEAR(tr.token_sq_err[static_cast<std::size_t>(t)], (s - 2.0) * (s - 2.0), 1e-12);
    EXPECT_EQ(tr.holder[static_cast<std::size_t>(t)], 0u);
  }
}

TEST(RunEpisode, ZeroNoiseErrorShrinksOnceAllVisited) {
  const auto m = roamtok::testing::ref5_model(NoiseKind::None);
  GraphProcessSpec spec(StaticGraph{Adjacency::complete(5)});
  TrialStreams streams = TrialStreams::derive(8, 0);
  const auto tr = run_episode(m, spec, TransitionRule::out_degree_reciprocal(),
                              AlphaSchedule::linear(), 300, 0, {}, streams);
  double prev = INFINITY;
  bool all = false;
  for (std::size_t k = 0; k < tr.t.size(); ++k) {
    if (tr.visited_count[k] < 5) continue;
    const Matrix sys = Matrix::Identity(2, 2) / static_cast<double>(tr.t[k] + 1) + m.sigma_c();
    const Vector s = sys.fullPivLu().solve(m.sigma_c() * m.theta());
    EXPECT_NEAR(tr.token_sq_err[k], (s - m.theta()).squaredNorm(), 1e-12);
    EXPECT_LE(tr.token_sq_err[k], prev);
    prev = tr.token_sq_err[k];
    all = true;
  }
  EXPECT_TRUE(all);
  EXPECT_LT(prev, 1e-4);
}

TEST(RunEpisode, VisitedSetIsMonotone) {
  const auto m = roamtok::testing::ref5_model();
  GraphProcessSpec spec(IidFailure{Adjacency::complete(5), 0.6});
  TrialStreams streams = TrialStreams::derive(2, 1);
  RecordOptions rec;
  rec.per_agent = true;
  const auto tr = run_episode(m, spec, TransitionRule::lazy(0.2), AlphaSchedule::linear(), 200, 3,
                              rec, streams);
  for (std::size_t k = 1; k < tr.t.size(); ++k) {
    EXPECT_GE(tr.visited_count[k], tr.visited_count[k - 1]);
    const auto& tau = tr.last_visit[k];
    EXPECT_EQ(tau[tr.holder[k]], tr.t[k]);
    for (std::size_t i = 0; i < 5; ++i) {
      if (i != tr.holder[k]) {
        EXPECT_LT(tau[i], tr.t[k]);
      }
      // τ_i is the last holding time at or before t.
      long expect = -1;
      for (std::size_t s = 0; s <= k; ++s)
        if (tr.holder[s] == i) expect = tr.t[s];
      EXPECT_EQ(tau[i], expect);
    }
  }
  EXPECT_EQ(tr.visited_count.front(), 1u);
}

TEST(RunEpisode, SampleTimesSubset) {
  const auto m = roamtok::testing::ref5_model();
  GraphProcessSpec spec(StaticGraph{roamtok::testing::ref5_static_graph()});
  RecordOptions all, some;
  some.sample_times = {0, 7, 50};
  TrialStreams s1 = TrialStreams::derive(4, 2), s2 = TrialStreams::derive(4, 2);
  const auto full = run_episode(m, spec, TransitionRule::out_degree_reciprocal(),
                                AlphaSchedule::linear(), 50, 0, all, s1);
  const auto part = run_episode(m, spec, TransitionRule::out_degree_reciprocal(),
                                AlphaSchedule::linear(), 50, 0, some, s2);
  ASSERT_EQ(part.t, (std::vector<long>{0, 7, 50}));
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(part.token_sq_err[k], full.token_sq_err[static_cast<std::size_t>(part.t[k])]);
  }
  EXPECT_EQ(full.final_estimate, part.final_estimate);
}

TEST(RunEpisode, DeterministicGivenStreams) {
  const auto m = roamtok::testing::ref5_model();
  GraphProcessSpec spec(IidFailure{Adjacency::complete(5), 0.5});
  TrialStreams a = TrialStreams::derive(99, 3), b = TrialStreams::derive(99, 3);
  RecordOptions rec;
  rec.central = true;
  const auto t1 = run_episode(m, spec, TransitionRule::out_degree_reciprocal(),
                              AlphaSchedule::linear(), 100, 0, rec, a);
  const auto t2 = run_episode(m, spec, TransitionRule::out_degree_reciprocal(),
                              AlphaSchedule::linear(), 100, 0, rec, b);
  EXPECT_EQ(t1.token_sq_err, t2.token_sq_err);
  EXPECT_EQ(t1.holder, t2.holder);
  EXPECT_EQ(t1.central_sq_err, t2.central_sq_err);
}

TEST(RunEpisode, ExhaustedSequencePropagates) {
  const auto m = roamtok::testing::ref5_model();
  GraphProcessSpec spec(DeterministicSequence{{directed_cycle(5), directed_cycle(5)}, false});
  TrialStreams s = TrialStreams::derive(1, 0);
  EXPECT_THROW(run_episode(m, spec, TransitionRule::out_degree_reciprocal(), AlphaSchedule::linear(),
                           5, 0, {}, s),
               SequenceExhausted);
}

TEST(StateIdentity, TwoHundredStepEpisodeOnSixNodes) {
  Rng mrng(21);
  const auto m = make_gaussian_rows_model(6, vec({1.0, -2.0, 0.5}), 0.7, mrng);
  GraphProcessSpec spec(IidFailure{Adjacency::complete(6), 0.5});
  const auto rep = check_state_identity(m, spec, TransitionRule::out_degree_reciprocal(),
                                        AlphaSchedule::linear(), 5, 200, 13);
  EXPECT_TRUE(rep.pass()) << rep.first_violation;
  EXPECT_EQ(rep.ticks_checked, 5 * 201);
  EXPECT_LE(rep.max_d_error, 1e-10);
  EXPECT_LE(rep.max_k_error, 1e-10);
}
