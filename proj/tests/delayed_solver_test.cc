#include "lqteam/delayed_solver.hpp"

#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "lqteam/moments.hpp"
#include "lqteam/policy.hpp"
#include "lqteam/simulator.hpp"
#include "oracles.hpp"

namespace lqteam {
namespace {

using fixtures::scalar;
constexpr int kInf = kInfiniteDelay;

TEST(DelayedFinite, SingleDmIsCentralizedLqr) {
  std::mt19937_64 gen(21);
  for (int trial = 0; trial < 6; ++trial) {
    const int n = 1 + trial % 2;
    const int T = 1 + trial % 5;
    const TeamSpec s = fixtures::random_centralized(gen, n, 1 + (trial / 2) % 2, T);
    ASSERT_TRUE(validate(s).ok());
    const DelayedSolution sol = solve_delayed_finite(s);
    const Matrix& A = s.blocked().A_blocks[0][0];
    const Matrix& B = s.blocked().B_blocks[0][0];
    const auto ref = oracle::batch_lqr(A, B, s.cost.Q, s.cost.R, s.cost.S, s.cost.Q, T);
    for (int t = 0; t < T; ++t) {
      EXPECT_LT((sol.policy.K[t][0] - ref.K[t]).cwiseAbs().maxCoeff(), 1e-10);
      EXPECT_LT((sol.policy.X[t][0] - ref.P[t]).cwiseAbs().maxCoeff(), 1e-10);
    }
    const double J = oracle::feedback_cost(A, B, s.cost.Q, s.cost.R, s.cost.S, s.cost.Q, ref.K, s.noise.init_diag,
                                           s.noise.sigma_w);
    EXPECT_NEAR(sol.predicted_cost, J, 1e-10 * std::max(1.0, J));
  }
}

TEST(DelayedFinite, DecoupledDmsSolveSeparately) {
  TeamSpec s = fixtures::delayed_pair(0.0, 0.0, 5);
  s.cost.Q = (Matrix(2, 2) << 1.0, 0.0, 0.0, 2.0).finished();
  s.info.delays = {{0, kInf}, {kInf, 0}};
  const DelayedSolution sol = solve_delayed_finite(s);
  ASSERT_EQ(sol.policy.graph.size(), 2);
  const auto r1 = oracle::batch_lqr(scalar(0.9), scalar(1), scalar(1), scalar(1), scalar(0), scalar(1), 5);
  const auto r2 = oracle::batch_lqr(scalar(0.8), scalar(1), scalar(2), scalar(1), scalar(0), scalar(2), 5);
  for (int t = 0; t < 5; ++t) {
    EXPECT_NEAR(sol.policy.K[t][0](0, 0), r1.K[t](0, 0), 1e-12);
    EXPECT_NEAR(sol.policy.K[t][1](0, 0), r2.K[t](0, 0), 1e-12);
  }
}

TEST(DelayedFinite, PredictedCostMatchesExactMoments) {
  for (const auto& s : {fixtures::delayed_pair(0.3, 0.2, 6), fixtures::delayed_pair(-0.4, 0.5, 3)}) {
    const DelayedSolution sol = solve_delayed_finite(s);
    const double exact = exact_cost(s, from_graph_policy(s, sol.policy));
    EXPECT_NEAR(sol.predicted_cost, exact, 1e-10 * std::max(1.0, exact));
  }
}

TEST(DelayedFinite, PredictedCostMatchesMonteCarlo) {
  const TeamSpec s = fixtures::delayed_pair(0.3, 0.2, 6);
  const DelayedSolution sol = solve_delayed_finite(s);
  const SimReport r = simulate(s, from_graph_policy(s, sol.policy), {100000, 17, 1, 0});
  EXPECT_LE(std::abs(r.mean_cost - sol.predicted_cost), 3.0 * r.std_error);
}

TEST(DelayedFinite, GraphPolicyIsPersonByPersonOptimal) {
  const TeamSpec s = fixtures::delayed_pair(0.3, 0.2, 4);
  const DelayedSolution sol = solve_delayed_finite(s);
  EXPECT_TRUE(pbp_check(s, sol.policy).passed);
}

TEST(DelayedFinite, SparsityViolationRejected) {
  TeamSpec s = fixtures::delayed_pair(0.3, 0.2, 4);
  s.info.delays = {{0, kInf}, {1, 0}};
  EXPECT_THROW(solve_delayed_finite(s), ValidationError);
}

TEST(Estimator, ZeroPrimitivesGiveZeroTrajectories) {
  const TeamSpec s = fixtures::delayed_pair(0.3, 0.2, 4);
  const DelayedSolution sol = solve_delayed_finite(s);
  const EstimatorTrace tr = simulate_estimator(s, sol.policy, Vector::Zero(2), std::vector<Vector>(4, Vector::Zero(2)));
  for (const auto& stage : tr.zeta)
    for (const auto& z : stage) EXPECT_EQ(z.cwiseAbs().maxCoeff(), 0.0);
  for (const auto& u : tr.u) EXPECT_EQ(u.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Estimator, SingleDmTracksState) {
  std::mt19937_64 gen(8);
  const TeamSpec s = fixtures::random_centralized(gen, 2, 1, 5);
  const DelayedSolution sol = solve_delayed_finite(s);
  std::normal_distribution<double> nd;
  for (int rollout = 0; rollout < 10; ++rollout) {
    Vector x0(2);
    x0 << nd(gen), nd(gen);
    std::vector<Vector> w(5, Vector(2));
    for (auto& v : w) v << nd(gen), nd(gen);
    const EstimatorTrace tr = simulate_estimator(s, sol.policy, x0, w);
    for (int t = 0; t <= 5; ++t) EXPECT_LT((tr.zeta[t][0] - tr.x[t]).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Estimator, StateIsSumOfNodeEstimates) {
  std::mt19937_64 gen(9);
  const TeamSpec s = fixtures::delayed_pair(0.3, 0.2, 5);
  const DelayedSolution sol = solve_delayed_finite(s);
  const auto& g = sol.policy.graph;
  std::normal_distribution<double> nd;
  Vector x0(2);
  x0 << nd(gen), nd(gen);
  std::vector<Vector> w(5, Vector(2));
  for (auto& v : w) v << nd(gen), nd(gen);
  const EstimatorTrace tr = simulate_estimator(s, sol.policy, x0, w);
  for (int t = 0; t <= 5; ++t) {
    Vector sum = Vector::Zero(2);
    for (int r = 0; r < g.size(); ++r)
      for (std::size_t p = 0; p < g.nodes[r].size(); ++p) sum(g.nodes[r][p]) += tr.zeta[t][r](p);
    EXPECT_LT((sum - tr.x[t]).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Estimator, DecoupledBlocksReproduceOwnStates) {
  TeamSpec s = fixtures::delayed_pair(0.0, 0.0, 3);
  s.cost.Q = Matrix::Identity(2, 2);
  s.info.delays = {{0, kInf}, {kInf, 0}};
  const DelayedSolution sol = solve_delayed_finite(s);
  Vector x0(2);
  x0 << 0.7, -1.2;
  std::vector<Vector> w(3, Vector::Constant(2, 0.1));
  const EstimatorTrace tr = simulate_estimator(s, sol.policy, x0, w);
  for (int t = 0; t <= 3; ++t) {
    EXPECT_NEAR(tr.zeta[t][0](0), tr.x[t](0), 1e-14);
    EXPECT_NEAR(tr.zeta[t][1](0), tr.x[t](1), 1e-14);
  }
}

TEST(DelayedInfinite, GoldenRatioGain) {
  const TeamSpec s = fixtures::centralized(scalar(1), scalar(1), scalar(1), scalar(1), scalar(0), scalar(1), scalar(1), 5);
  const DelayedInfiniteSolution sol = solve_delayed_infinite(s);
  EXPECT_NEAR(sol.policy.gain(0, 0)(0, 0), -0.6180339887, 1e-9);
  EXPECT_TRUE(sol.rank_checks[0].passed);
  EXPECT_LT(sol.closed_loop_radius, 1.0);
}

TEST(DelayedInfinite, DecoupledIsTwoDares) {
  TeamSpec s = fixtures::delayed_pair(0.0, 0.0, 3);
  s.cost.Q = (Matrix(2, 2) << 1.0, 0.0, 0.0, 3.0).finished();
  s.info.delays = {{0, kInf}, {kInf, 0}};
  const DelayedInfiniteSolution sol = solve_delayed_infinite(s);
  EXPECT_NEAR(sol.policy.gain(0, 0)(0, 0), dare_solve(scalar(0.9), scalar(1), scalar(1), scalar(1)).K(0, 0), 1e-9);
  EXPECT_NEAR(sol.policy.gain(0, 1)(0, 0), dare_solve(scalar(0.8), scalar(1), scalar(3), scalar(1)).K(0, 0), 1e-9);
}

TEST(DelayedInfinite, FiniteGainsConvergeUnderDoubling) {
  const TeamSpec s = fixtures::delayed_pair(0.3, 0.2, 4);
  const DelayedInfiniteSolution inf = solve_delayed_infinite(s);
  double last = 1.0;
  for (int T = 8; T <= 256; T *= 2) {
    const DelayedSolution fin = solve_delayed_finite(s, T);
    double d = 0.0;
    for (int r = 0; r < fin.policy.graph.size(); ++r)
      d = std::max(d, (fin.policy.K[0][r] - inf.policy.gain(0, r)).cwiseAbs().maxCoeff());
    last = d;
  }
  EXPECT_LT(last, 1e-8);
}

TEST(DelayedInfinite, AverageCostMatchesLongHorizon) {
  const TeamSpec s = fixtures::delayed_pair(0.3, 0.2, 4);
  const DelayedInfiniteSolution inf = solve_delayed_infinite(s);
  const DelayedSolution fin = solve_delayed_finite(s, 4000);
  EXPECT_NEAR(inf.average_cost, fin.predicted_cost, 5e-3);
}

TEST(RankCondition, DetectsUnobservableUnitCircleMode) {
  // A = 1 with zero state weight: the mode on the unit circle is invisible.
  const RankConditionResult r = unit_circle_rank_condition(scalar(1), scalar(0), scalar(0), scalar(1), scalar(0));
  EXPECT_FALSE(r.passed);
  const RankConditionResult ok = unit_circle_rank_condition(scalar(1), scalar(1), scalar(1), scalar(1), scalar(0));
  EXPECT_TRUE(ok.passed);
  EXPECT_TRUE(ok.literal_evaluated);
}

}  // namespace
}  // namespace lqteam
