#include <gtest/gtest.h>

#include <mdpalloc/benchgen.hpp>
#include <mdpalloc/errors.hpp>
#include <mdpalloc/mdp.hpp>

#include "oracles.hpp"

using namespace mdpalloc;

namespace {

Mdp random_mdp(std::uint64_t seed, Index ns = 5, Index na = 4, double gamma = 0.9) {
  RandomCmdpParams p;
  p.num_states = ns;
  p.num_actions = na;
  p.num_resources = 0;
  p.num_capacities = 0;
  p.discount = gamma;
  return random_cmdp(p, seed).mdp;
}

}  // namespace

TEST(Mdp, RejectsNonStochasticTransitions) {
  std::vector<Eigen::MatrixXd> p(1, Eigen::MatrixXd::Identity(2, 2));
  p[0](0, 1) = 0.5;
  EXPECT_THROW(Mdp(p, Eigen::MatrixXd::Zero(2, 1), 0.9, Eigen::Vector2d(1, 0)), InputError);
}

TEST(Mdp, RejectsDiscountOutsideUnitInterval) {
  std::vector<Eigen::MatrixXd> p(1, Eigen::MatrixXd::Identity(2, 2));
  EXPECT_THROW(Mdp(p, Eigen::MatrixXd::Zero(2, 1), 1.0, Eigen::Vector2d(1, 0)), InputError);
}

TEST(Mdp, ZeroRewardHasZeroValue) {
  const Mdp mdp = random_mdp(3).with_reward(Eigen::MatrixXd::Zero(5, 4));
  EXPECT_NEAR(solve_mdp(mdp).value, 0.0, 1e-12);
}

TEST(Mdp, DualLpMatchesValueIterationOracle) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Mdp mdp = random_mdp(seed, 2 + seed % 6, 2 + seed % 4, seed % 2 ? 0.9 : 0.6);
    const Eigen::VectorXd v = oracle::value_iteration(mdp);
    const MdpSolution sol = solve_mdp(mdp);
    EXPECT_NEAR(sol.value, mdp.initial().dot(v), 1e-6) << "seed " << seed;
    EXPECT_NEAR(value_iteration(mdp).dot(mdp.initial()), sol.value, 1e-6) << "seed " << seed;
  }
}

TEST(Mdp, OccupationMassAndFlowConservation) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Mdp mdp = random_mdp(seed);
    const MdpSolution sol = solve_mdp(mdp);
    EXPECT_NEAR(sol.occupation.total(), 1.0 / (1.0 - mdp.discount()), 1e-6) << "seed " << seed;
    EXPECT_LT(sol.occupation.flow_residual(mdp), 1e-7) << "seed " << seed;
    EXPECT_GE(sol.occupation.x.minCoeff(), -1e-9);
  }
}

TEST(Mdp, PrimalAndDualLpAgree) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Mdp mdp = random_mdp(seed);
    const LpSolution primal = solve_lp(build_primal_lp(mdp));
    const LpSolution dual = solve_lp(build_dual_lp(mdp));
    ASSERT_EQ(primal.status, LpStatus::kOptimal);
    ASSERT_EQ(dual.status, LpStatus::kOptimal);
    EXPECT_NEAR(primal.objective, dual.objective, 1e-6) << "seed " << seed;
  }
}

TEST(Mdp, ExtractedPolicyIsDeterministicAndOptimal) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Mdp mdp = random_mdp(seed);
    const MdpSolution sol = solve_mdp(mdp);
    EXPECT_TRUE(sol.policy.is_deterministic(1e-9)) << "seed " << seed;
    EXPECT_NEAR(policy_value(mdp, sol.policy), sol.value, 1e-6) << "seed " << seed;
    const OccupationMeasure back = occupation_from_policy(mdp, sol.policy);
    EXPECT_NEAR(back.total(), sol.occupation.total(), 1e-6);
  }
}

TEST(Mdp, GreedyPolicyOfOptimalValuesIsOptimal) {
  const Mdp mdp = random_mdp(8);
  const ValueFunction v = value_iteration(mdp, 1e-10);
  EXPECT_LT(bellman_residual(mdp, v), 1e-7);
  const ValueFunction back = evaluate_policy(mdp, greedy_policy(mdp, v));
  EXPECT_LT((back - v).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Mdp, CostConstraintCanForceRandomization) {
  // One state, two actions: reward 1 at cost 1, reward 0 at cost 0, budget half the mass.
  std::vector<Eigen::MatrixXd> p(2, Eigen::MatrixXd::Ones(1, 1));
  Eigen::MatrixXd r(1, 2);
  r << 1, 0;
  const Mdp mdp(p, r, 0.5, Eigen::VectorXd::Ones(1));
  CostConstraint c{(Eigen::MatrixXd(1, 2) << 1, 0).finished(), 1.0};
  const MdpSolution sol = solve_mdp(mdp, {c});
  EXPECT_NEAR(sol.value, 1.0, 1e-9);
  EXPECT_FALSE(sol.policy.is_deterministic(1e-6));
}

TEST(DeliveryExample, UnconstrainedOptimalValues) {
  const Mdp mdp = delivery_example_agent().mdp;
  const Eigen::VectorXd v = oracle::value_iteration(mdp);
  EXPECT_NEAR(v(0), 95.3, 0.1);
  EXPECT_NEAR(v(1), 94.7, 0.1);
  EXPECT_NEAR(v(2), 86.7, 0.1);
}

TEST(DeliveryExample, UniformStartOccupationMeasure) {
  const Mdp mdp = delivery_example_agent().mdp.with_initial(Eigen::VectorXd::Constant(3, 1.0 / 3.0));
  const MdpSolution sol = solve_mdp(mdp);
  EXPECT_NEAR(sol.occupation.x(0, 2), 4.9, 0.1);
  EXPECT_NEAR(sol.occupation.x(1, 3), 4.8, 0.1);
  EXPECT_NEAR(sol.occupation.x(2, 4), 0.3, 0.1);
  EXPECT_EQ(sol.policy.actions(), (std::vector<Index>{2, 3, 4}));
}
