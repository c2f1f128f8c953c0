#include "lqteam/tree_solver.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"

namespace lqteam {
namespace {

using fixtures::scalar;

const double kGolden = (1.0 + std::sqrt(5.0)) / 2.0;

double max_diff(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, (a[k] - b[k]).cwiseAbs().maxCoeff());
  return d;
}

TEST(SolveKP, SingleStage) {
  std::mt19937_64 gen(1);
  TeamSpec s = fixtures::random_tree(gen, 2, 2, 1, 1);
  const KpSchedule kp = solve_k_p(s, 1);
  EXPECT_EQ(kp.K[0], Matrix::Zero(1, 2));
  EXPECT_EQ(kp.P[0], s.cost.Q);
}

TEST(SolveKP, ScalarTwoStages) {
  const KpSchedule kp = solve_k_p(fixtures::scalar_tree(0.0, 1.0, 0.0, 2), 2);
  EXPECT_DOUBLE_EQ(kp.K[1](0, 0), 0.0);
  EXPECT_DOUBLE_EQ(kp.P[1](0, 0), 1.0);
  EXPECT_NEAR(kp.K[0](0, 0), -0.5, 1e-15);
  EXPECT_NEAR(kp.P[0](0, 0), 1.5, 1e-15);
}

TEST(SolveKP, LongHorizonApproachesStationaryGain) {
  const KpSchedule kp = solve_k_p(fixtures::scalar_tree(0.0, 1.0, 0.0, 60), 60);
  EXPECT_NEAR(kp.K[0](0, 0), -kGolden / (1.0 + kGolden), 1e-12);
  EXPECT_NEAR(kp.K[0](0, 0), -0.6180339887, 1e-9);
}

TEST(SolveKP, MatchesBatchOracle) {
  std::mt19937_64 gen(2);
  for (int trial = 0; trial < 5; ++trial) {
    const TeamSpec s = fixtures::random_tree(gen, 2, 2, 2, 5);
    const KpSchedule kp = solve_k_p(s, 5);
    const auto& d = s.homogeneous();
    const auto ref = oracle::batch_lqr(d.A, d.B, s.cost.Q, s.cost.R, Matrix::Zero(2, 2), Matrix::Zero(2, 2), 5);
    EXPECT_LT(max_diff(kp.K, ref.K), 1e-10);
    EXPECT_LT(max_diff(kp.P, ref.P), 1e-10);
  }
}

TEST(CouplingGains, VanishWithoutControlCoupling) {
  const TreePolicy p = solve_tree(fixtures::scalar_tree(0.0, 1.0, 0.5, 6));
  for (const auto& L : p.L) EXPECT_EQ(L(0, 0), 0.0);
}

TEST(CouplingGains, SingleStageIsZero) {
  std::mt19937_64 gen(3);
  const TeamSpec s = fixtures::random_tree(gen, 2, 2, 2, 1);
  const TreePolicy p = solve_tree(s);
  EXPECT_LT(p.L[0].cwiseAbs().maxCoeff(), 1e-14);
}

TEST(CouplingGains, ScalarInstanceMatchesMinimizer) {
  const TeamSpec s = fixtures::scalar_tree(0.5, 1.0, 0.5, 2);
  const TreePolicy p = solve_tree(s);
  ASSERT_DOUBLE_EQ(p.Sigma(0, 0), 0.5);
  const auto L = oracle::minimize_coupling(fixtures::team_of(s), p.K, p.Sigma, 1.0);
  EXPECT_LT(max_diff(p.L, L), 1e-8);
  EXPECT_GT(std::abs(p.L[0](0, 0)), 1e-3);
}

class CouplingOracle : public ::testing::TestWithParam<int> {};

TEST_P(CouplingOracle, RandomInstancesMatchMinimizer) {
  const int N = GetParam();
  std::mt19937_64 gen(100 + N);
  for (int trial = 0; trial < 3; ++trial) {
    const int n = 1 + trial % 2;
    const int m = 1 + (trial / 2) % 2;
    const TeamSpec s = fixtures::random_tree(gen, N, n, m, 3);
    ASSERT_TRUE(validate(s).ok());
    const TreePolicy p = solve_tree(s);
    const auto L = oracle::minimize_coupling(fixtures::team_of(s), p.K, p.Sigma, p.population.beta());
    EXPECT_LT(max_diff(p.L, L), 1e-7) << "N=" << N << " trial " << trial;
  }
}

INSTANTIATE_TEST_SUITE_P(Populations, CouplingOracle, ::testing::Values(2, 3, 4));

TEST(PredictedCost, SingleStageIsStateCost) {
  std::mt19937_64 gen(4);
  const TeamSpec s = fixtures::random_tree(gen, 2, 2, 1, 1);
  const TreePolicy p = solve_tree(s);
  // Pair state weights are nonzero here, so both diagonal and pair terms enter.
  const double expected = 2.0 * (s.cost.Q * s.noise.init_diag).trace() +
                          2.0 * (s.cost.Q_tilde * s.noise.init_offdiag).trace();
  EXPECT_NEAR(predicted_cost(s, p), expected, 1e-12);
  TeamSpec plain = s;
  plain.cost.Q_tilde = Matrix();
  EXPECT_NEAR(predicted_cost(plain, solve_tree(plain)), 2.0 * (s.cost.Q * s.noise.init_diag).trace(), 1e-12);
}

TEST(PredictedCost, UncoupledIsTwoLqrCosts) {
  const TeamSpec s = fixtures::scalar_tree(0.0, 1.3, 0.4, 5);
  const TreePolicy p = solve_tree(s);
  double expected = (p.P[0] * s.noise.init_diag).trace();
  for (int t = 1; t <= 5; ++t) expected += (p.P[t] * s.noise.sigma_w).trace();
  EXPECT_NEAR(predicted_cost(s, p), 2.0 * expected / 5, 1e-12);
}

TEST(PredictedCost, MatchesCovarianceOracle) {
  std::mt19937_64 gen(5);
  for (int N : {2, 3, 4}) {
    for (int trial = 0; trial < 3; ++trial) {
      const TeamSpec s = fixtures::random_tree(gen, N, 2, 1 + trial % 2, 4);
      const TreePolicy p = solve_tree(s);
      const double ref = oracle::team_cost(fixtures::team_of(s),
                                           oracle::symmetric_profile(N, p.K, p.L, p.Sigma, p.population.beta()));
      EXPECT_NEAR(predicted_cost(s, p), ref, 1e-10 * std::max(1.0, std::abs(ref)));
    }
  }
}

TEST(PredictedCost, MeanFieldMatchesCovarianceOracle) {
  for (int N : {2, 3, 5}) {
    const TeamSpec s = fixtures::scalar_meanfield(0.5, 0.5, 0.5, 3, N);
    const TreePolicy p = solve_tree(s);
    const double ref =
        oracle::team_cost(fixtures::team_of(s), oracle::symmetric_profile(N, p.K, p.L, p.Sigma, 1.0));
    EXPECT_NEAR(predicted_cost(s, p), ref, 1e-12);
    const auto L = oracle::minimize_coupling(fixtures::team_of(s), p.K, p.Sigma, 1.0);
    EXPECT_LT(max_diff(p.L, L), 1e-8);
  }
}

TEST(PredictedCost, ModeMismatchRejected) {
  const TeamSpec s = fixtures::scalar_tree(0.5, 1.0, 0.5, 2);
  TreePolicy p = solve_tree(s);
  p.population = {PopulationMode::n_dm, 4};
  EXPECT_THROW(predicted_cost(s, p), ValidationError);
}

TEST(OptcostVariants, OneLiteralReadingMatches) {
  const TeamSpec s = fixtures::scalar_tree(0.5, 1.0, 0.5, 4);
  const TreePolicy p = solve_tree(s);
  const OptcostVariants v = literal_optcost_variants(s, p);
  EXPECT_NEAR(v.exact, predicted_cost(s, p), 0.0);
  // Exactly one exponent convention can agree once the cross term is active.
  EXPECT_FALSE(v.power_t_matches && v.power_t_minus_1_matches);
}

TEST(InfiniteTree, UncoupledAverageCost) {
  const TeamSpec s = fixtures::scalar_tree(0.0, 1.0, 0.0, 10);
  const InfiniteTreeSolution sol = solve_infinite_tree(s);
  EXPECT_NEAR(sol.P(0, 0), kGolden, 1e-8);
  EXPECT_NEAR(sol.K(0, 0), -0.6180339887, 1e-9);
  EXPECT_NEAR(sol.average_cost, 2.0 * kGolden * 1.0, 1e-8);
  for (const auto& L : sol.L) EXPECT_EQ(L(0, 0), 0.0);
  EXPECT_LT(sol.closed_loop_radius, 1.0);
}

TEST(InfiniteTree, CoupledGainsDecayAndStabilize) {
  const TeamSpec s = fixtures::scalar_tree(0.5, 1.0, 0.5, 10);
  const InfiniteTreeSolution sol = solve_infinite_tree(s);
  ASSERT_FALSE(sol.disagreement.empty());
  EXPECT_LT(sol.disagreement.back().second, 1e-7);
  ASSERT_LT(sol.decay_horizon, static_cast<int>(sol.L.size()));
  for (std::size_t t = sol.decay_horizon; t < sol.L.size(); ++t) EXPECT_LT(std::abs(sol.L[t](0, 0)), 1e-8);
  // Doubling once more reproduces the prefix.
  const TreePolicy longer = solve_tree(s, 2 * sol.converged_horizon);
  for (std::size_t t = 0; t < sol.L.size(); ++t) EXPECT_NEAR(longer.L[t](0, 0), sol.L[t](0, 0), 1e-7);
}

TEST(InfiniteTree, FiniteHorizonValueReachesGoldenRatio) {
  const TeamSpec s = fixtures::scalar_tree(0.0, 1.0, 0.0, 200);
  const KpSchedule kp = solve_k_p(s, 200);
  EXPECT_LT(std::abs(kp.P[0](0, 0) - kGolden), 1e-8);
}

TEST(MeanField, NoCouplingMeansZeroSeries) {
  const TeamSpec s = fixtures::scalar_meanfield(0.0, 0.0, 0.5, 3, 4);
  const MeanFieldLimit lim = meanfield_limit_policy(s, 3);
  for (const auto& Ls : lim.L_series)
    for (const auto& L : Ls) EXPECT_EQ(L(0, 0), 0.0);
  for (double d : lim.successive_diff) EXPECT_EQ(d, 0.0);
}

TEST(MeanField, IndependentInitialStatesKillFeedforward) {
  const TeamSpec s = fixtures::scalar_meanfield(0.5, 0.5, 0.0, 3, 8);
  const TreePolicy p = solve_tree(s);
  for (int t = 0; t < 3; ++t) EXPECT_EQ(p.feedforward(t)(0, 0), 0.0);
}

TEST(MeanField, LimitReportedAndCauchy) {
  const TeamSpec s = fixtures::scalar_meanfield(0.5, 0.0, 0.5, 3, 4);
  const MeanFieldLimit lim = meanfield_limit_policy(s, 3);
  EXPECT_EQ(lim.schedule.front(), 2);
  EXPECT_EQ(lim.schedule.back(), 512);
  EXPECT_LT(lim.successive_diff.back(), 1e-7);
  EXPECT_EQ(lim.policy.population.mode, PopulationMode::mean_field_limit);
  EXPECT_GT(std::abs(lim.policy.L[0](0, 0)), 1e-3);
}

TEST(MeanField, ProportionalCouplingHasNoFeedforward) {
  // Q~/Q == R~/R: sum and difference modes share one LQR gain.
  const TeamSpec s = fixtures::scalar_meanfield(0.5, 0.5, 0.5, 3, 4);
  const TreePolicy p = solve_tree(s, 3, {PopulationMode::mean_field_n, 4});
  for (const auto& L : p.L) EXPECT_LT(L.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Population, TwoDmAndNdmAgreeAtTwo) {
  const TeamSpec s = fixtures::scalar_tree(0.5, 1.0, 0.5, 4);
  const TreePolicy a = solve_tree(s, 4, {PopulationMode::two_dm, 2});
  const TreePolicy b = solve_tree(s, 4, {PopulationMode::n_dm, 2});
  EXPECT_LT(max_diff(a.L, b.L), 1e-14);
}

}  // namespace
}  // namespace lqteam
