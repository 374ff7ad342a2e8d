#include <gtest/gtest.h>

#include <mdpalloc/benchgen.hpp>
#include <mdpalloc/errors.hpp>
#include <mdpalloc/resource_model.hpp>

#include "oracles.hpp"

using namespace mdpalloc;

namespace {

ConstrainedMdp random_agent(std::uint64_t seed, bool binary = true) {
  RandomCmdpParams p;
  p.num_states = 2 + static_cast<Index>(seed % 5);
  p.num_actions = 3 + static_cast<Index>(seed % 3);
  p.num_resources = 1 + static_cast<Index>(seed % 5);
  p.num_capacities = 1 + static_cast<Index>(seed % 2);
  p.binary_rho = binary;
  return random_cmdp(p, seed);
}

bool fits(const Bundle& z, const ResourceSpec& spec) {
  for (Index c = 0; c < spec.num_capacities(); ++c) {
    double used = 0.0;
    for (Index o = 0; o < spec.num_resources(); ++o) used += spec.kappa(o, c) * z[o];
    if (used > spec.kappa_hat(c) + 1e-9) return false;
  }
  return true;
}

// Best value over every integer bundle up to the largest requirement, each
// valued by value iteration restricted to the actions the bundle enables.
double bundle_oracle(const ConstrainedMdp& cmdp) {
  const ResourceSpec& spec = cmdp.spec;
  const Index no = spec.num_resources(), na = cmdp.mdp.num_actions();
  Bundle top(no, 0);
  for (Index o = 0; o < no; ++o) top[o] = static_cast<int>(spec.rho.col(o).maxCoeff());
  Bundle z(no, 0);
  double best = -kInf;
  while (true) {
    if (fits(z, spec)) {
      std::vector<char> allowed(na, 1);
      for (Index a = 0; a < na; ++a)
        for (Index o = 0; o < no; ++o)
          if (spec.rho(a, o) > z[o]) allowed[a] = 0;
      best = std::max(best, cmdp.mdp.initial().dot(oracle::value_iteration(cmdp.mdp, allowed)));
    }
    Index o = 0;
    while (o < no && z[o] == top[o]) z[o++] = 0;
    if (o == no) break;
    ++z[o];
  }
  return best;
}

}  // namespace

TEST(ResourceModel, CapacityAndAllowedActions) {
  const ConstrainedMdp agent = delivery_example_agent();
  EXPECT_TRUE(check_capacity({1, 1, 0}, agent.spec));
  EXPECT_TRUE(check_capacity({1, 0, 1}, agent.spec));
  EXPECT_FALSE(check_capacity({1, 1, 1}, agent.spec));
  EXPECT_TRUE(check_capacity({0, 1, 1}, agent.spec));
  EXPECT_EQ(allowed_actions(agent.spec, {1, 0, 0}), (std::vector<char>{1, 1, 0, 1, 0}));
  EXPECT_EQ(allowed_actions(agent.spec, {0, 0, 0}), (std::vector<char>{1, 0, 0, 0, 0}));
}

TEST(ResourceModel, UsageFollowsOccupationSupport) {
  const ConstrainedMdp agent = delivery_example_agent();
  OccupationMeasure x;
  x.x = Eigen::MatrixXd::Zero(3, 5);
  x.x(0, 2) = 3.0;
  x.x(1, 3) = 7.0;
  EXPECT_EQ(policy_resource_usage(x, agent.spec), (Bundle{1, 1, 0}));
  x.x(2, 4) = 1e-12;  // below the activity threshold
  EXPECT_EQ(policy_resource_usage(x, agent.spec), (Bundle{1, 1, 0}));
}

TEST(ResourceModel, FeasibleBundlesRespectCapacityAndBound) {
  const ConstrainedMdp agent = delivery_example_agent();
  const auto all = feasible_bundles(agent.spec, {1, 1, 1});
  EXPECT_EQ(all.size(), 7u);  // all but {1,1,1}
  for (const auto& b : all) EXPECT_TRUE(check_capacity(b, agent.spec));
  EXPECT_EQ(feasible_bundles(agent.spec, {1, 0, 0}).size(), 2u);
}

TEST(ResourceModel, BundleValueMatchesRestrictedValueIteration) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const ConstrainedMdp agent = random_agent(seed);
    const Bundle bound(agent.spec.num_resources(), 1);
    for (const Bundle& z : feasible_bundles(agent.spec, bound)) {
      const BundleValue bv = bundle_value(agent, z);
      ASSERT_TRUE(bv.feasible);
      const double expect = agent.mdp.initial().dot(oracle::value_iteration(agent.mdp, allowed_actions(agent.spec, z)));
      EXPECT_NEAR(bv.value, expect, 1e-6) << "seed " << seed;
    }
  }
}

TEST(ResourceModel, BinaryMilpMatchesBundleEnumeration) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const ConstrainedMdp agent = random_agent(seed);
    const SingleAgentMilp built = build_single_agent_milp(agent);
    const MilpSolution s = solve_milp(built.milp);
    ASSERT_EQ(s.status, MilpStatus::kOptimal) << "seed " << seed;
    EXPECT_NEAR(s.objective, bundle_oracle(agent), 1e-6) << "seed " << seed;
  }
}

TEST(ResourceModel, GlobalNormalizationHasSameOptimum) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ConstrainedMdp agent = random_agent(seed);
    const MilpSolution a = solve_milp(build_single_agent_milp(agent, Normalization::kPerResource).milp);
    const MilpSolution b = solve_milp(build_single_agent_milp(agent, Normalization::kGlobal).milp);
    EXPECT_NEAR(a.objective, b.objective, 1e-6) << "seed " << seed;
  }
}

TEST(ResourceModel, NonbinaryBuilderMatchesBinaryBuilder) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const ConstrainedMdp agent = random_agent(seed);
    const MilpSolution a = solve_milp(build_single_agent_milp(agent).milp);
    const MilpSolution b = solve_milp(build_single_agent_milp_nonbinary(agent).milp);
    EXPECT_NEAR(a.objective, b.objective, 1e-6) << "seed " << seed;
  }
}

TEST(ResourceModel, NonbinaryBuilderMatchesIntegerBundleOracle) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const ConstrainedMdp agent = random_agent(seed, false);
    const MilpSolution s = solve_milp(build_single_agent_milp_nonbinary(agent).milp);
    ASSERT_EQ(s.status, MilpStatus::kOptimal);
    EXPECT_NEAR(s.objective, bundle_oracle(agent), 1e-6) << "seed " << seed;
  }
}

TEST(ResourceModel, OptimaAreDeterministicAndSynchronized) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const ConstrainedMdp agent = random_agent(seed);
    const SingleAgentMilp built = build_single_agent_milp(agent);
    const MilpSolution s = solve_milp(built.milp);
    ASSERT_EQ(s.status, MilpStatus::kOptimal);
    const Index ns = agent.mdp.num_states(), na = agent.mdp.num_actions();
    const OccupationMeasure x = OccupationMeasure::from_vector(s.x.head(built.layout.num_x), ns, na);
    // a switched-off indicator leaves every action that needs the resource idle
    for (Index o = 0; o < built.layout.num_delta; ++o) {
      if (s.x(built.layout.delta_offset + o) > 0.5) continue;
      for (Index a = 0; a < na; ++a)
        if (agent.spec.rho(a, o) > 0) EXPECT_LE(x.x.col(a).sum(), 1e-7) << "seed " << seed;
    }
    const ConstrainedSolution cs = solve_constrained(agent);
    EXPECT_TRUE(cs.policy.is_deterministic(1e-9)) << "seed " << seed;
    EXPECT_NEAR(cs.value, s.objective, 1e-6);
    EXPECT_TRUE(check_capacity(cs.usage, agent.spec));
  }
}

TEST(ResourceModel, MinimalBundleKeepsValueAndDropsIdleResources) {
  // Free resource with no use: the minimal pass must not switch it on.
  ConstrainedMdp agent = delivery_example_agent();
  agent.spec.kappa(2, 0) = 0.0;  // mechanic now free, still optional
  ConstrainedOptions opt;
  opt.minimal_bundle = true;
  const ConstrainedSolution s = solve_constrained(agent, opt);
  const ConstrainedSolution plain = solve_constrained(agent);
  EXPECT_NEAR(s.value, plain.value, 1e-6);
  int on = 0;
  for (int v : s.indicators) on += v;
  EXPECT_EQ(on, 2);  // truck and forklift; the mechanic is unreachable from s1
}

TEST(ResourceModel, NegativeBudgetIsInfeasible) {
  ConstrainedMdp agent = delivery_example_agent();
  agent.spec.kappa_hat(0) = -1.0;
  EXPECT_EQ(solve_constrained(agent).status, MilpStatus::kInfeasible);
}

TEST(DeliveryExample, NoUniformlyOptimalPolicy) {
  const ConstrainedSolution from_s1 = solve_constrained(delivery_example_agent(10.0, 0));
  EXPECT_EQ(from_s1.usage, (Bundle{1, 1, 0}));
  EXPECT_EQ(from_s1.policy.actions()[0], 2);
  EXPECT_EQ(from_s1.policy.actions()[1], 3);

  const ConstrainedSolution from_s3 = solve_constrained(delivery_example_agent(10.0, 2));
  EXPECT_EQ(from_s3.usage, (Bundle{1, 0, 1}));
  EXPECT_EQ(from_s3.policy.actions()[2], 4);
  EXPECT_EQ(from_s3.policy.actions()[0], 1);
}

TEST(DeliveryExample, BinaryFormulationDimensions) {
  // The noop column is kept, so the occupation block is |S| x |A| = 3 x 5.
  const SingleAgentMilp built = build_single_agent_milp(delivery_example_agent());
  EXPECT_EQ(built.layout.num_x, 15);
  EXPECT_EQ(built.layout.num_delta, 3);
  EXPECT_EQ(built.layout.num_rows(), 7);
}

TEST(DeliveryExample, NonbinaryCapacityRowsArePruned) {
  const SingleAgentMilp built = build_single_agent_milp_nonbinary(delivery_example_agent());
  EXPECT_EQ(built.layout.unpruned_capacity_rows, 64);
  EXPECT_EQ(built.layout.capacity_rows, 4);
  EXPECT_EQ(built.layout.num_delta, 4);  // no indicator for the noop
}

TEST(DeliveryExample, BundleValues) {
  const ConstrainedMdp a1 = delivery_example_agent(10.0);
  const ConstrainedMdp a2 = delivery_example_agent(12.0);
  EXPECT_NEAR(bundle_value(a1, {0, 0, 0}).value, 0.0, 1e-9);
  EXPECT_NEAR(bundle_value(a1, {1, 0, 0}).value, 50.0, 1e-6);
  EXPECT_NEAR(bundle_value(a1, {1, 1, 0}).value, 95.3, 0.1);
  // the full bundle exceeds the budget of 8, so only capacity-feasible behaviour inside it counts
  EXPECT_NEAR(bundle_value(a2, {1, 1, 1}).value, bundle_value(a2, {1, 1, 0}).value, 1e-9);
  EXPECT_NEAR(solve_mdp(a2.mdp).value, 112.4, 0.1);
}
