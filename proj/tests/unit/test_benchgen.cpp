#include <random>

#include <gtest/gtest.h>

#include <mdpalloc/benchgen.hpp>
#include <mdpalloc/errors.hpp>

#include "oracles.hpp"

using namespace mdpalloc;

namespace {

std::vector<Bundle> all_bundles(int m, Index n) {
  std::vector<Bundle> out;
  Bundle z(n, 0);
  while (true) {
    out.push_back(z);
    Index i = 0;
    while (i < n && z[i] == m) z[i++] = 0;
    if (i == n) return out;
    ++z[i];
  }
}

// Random table closed upward so that it is non-decreasing in every coordinate.
std::vector<double> monotone_table(std::mt19937_64& rng, int m, Index n) {
  std::uniform_real_distribution<double> u(0.0, 10.0);
  const auto bundles = all_bundles(m, n);
  std::vector<double> t(bundles.size());
  for (auto& v : t) v = std::round(u(rng) * 100) / 100;
  // bundles are in mixed radix order, so every predecessor comes earlier
  for (std::size_t b = 0; b < bundles.size(); ++b)
    for (Index i = 0; i < n; ++i)
      if (bundles[b][i] > 0) {
        Bundle down = bundles[b];
        --down[i];
        t[b] = std::max(t[b], t[utility_state(down, m)]);
      }
  return t;
}

}  // namespace

TEST(Benchgen, KnapsackReductionMatchesDynamicProgram) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const KnapsackInstance inst = random_knapsack(seed, 12);
    const double expect = oracle::knapsack_dp(inst.items, inst.bound);
    EXPECT_NEAR(knapsack_dp(inst), expect, 1e-9);
    const KnapsackMdp km = gen_from_knapsack(inst, 0.9);
    EXPECT_NEAR(km.expected_optimum, expect, 1e-9);
    EXPECT_NEAR(solve_constrained(km.cmdp).value, expect, 1e-6) << "seed " << seed;
  }
}

TEST(Benchgen, KnapsackRejectsFractionalCosts) {
  KnapsackInstance inst;
  inst.items = {{1.5, 3.0}};
  inst.bound = 2;
  EXPECT_THROW(gen_from_knapsack(inst, 0.9), InputError);
}

TEST(Benchgen, UtilityConstructionReproducesEveryBundle) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 12; ++trial) {
    const int m = 1 + trial % 2;
    const Index n = 1 + trial % 3;
    const std::vector<double> table = monotone_table(rng, m, n);
    const UtilityFn f = [&](const Bundle& z) { return table[utility_state(z, m)]; };
    const ConstrainedMdp cmdp = gen_from_utility(f, m, n);
    for (const Bundle& z : all_bundles(m, n))
      EXPECT_NEAR(bundle_value(cmdp, z).value, f(z), 1e-6) << "trial " << trial;
  }
}

TEST(Benchgen, UtilityConstructionRejectsDecreasingFunctions) {
  const UtilityFn f = [](const Bundle& z) { return z[0] == 0 ? 1.0 : 0.0; };
  EXPECT_THROW(gen_from_utility(f, 1, 1), InputError);
}

TEST(Benchgen, DeliveryShapeAndDeterminism) {
  DeliveryParams p;
  p.grid_n = 4;
  p.num_agents = 3;
  p.num_resources = 5;
  p.seed = 12;
  const AuctionInstance a = gen_delivery(p), b = gen_delivery(p);
  ASSERT_EQ(a.num_agents(), 3);
  EXPECT_EQ(a.agents[0].mdp.num_states(), 16);
  EXPECT_EQ(a.agents[0].mdp.num_actions(), 4 + 5);
  for (Index m = 0; m < 3; ++m) {
    EXPECT_EQ(a.agents[m].mdp.reward(), b.agents[m].mdp.reward());
    EXPECT_EQ(a.agents[m].mdp.initial(), b.agents[m].mdp.initial());
    // each delivery needs its own resource plus one more
    for (Index i = 0; i < 5; ++i) {
      EXPECT_EQ(a.agents[m].spec.rho(4 + i, i), 1.0);
      EXPECT_EQ(a.agents[m].spec.rho.row(4 + i).sum(), 2.0);
    }
  }
  EXPECT_EQ(a.rho_hat, (Bundle(5, 1)));  // floor(0.5 * 3)
  p.seed = 13;
  EXPECT_NE(gen_delivery(p).agents[0].mdp.reward(), a.agents[0].mdp.reward());
}

TEST(Benchgen, DeliveryConstraintLevels) {
  DeliveryParams p;
  p.num_resources = 4;
  p.c_loc = 0.0;
  p.c_glob = 0.0;
  const AuctionInstance tight = gen_delivery(p);
  EXPECT_EQ(tight.rho_hat, (Bundle(4, 0)));
  EXPECT_EQ(tight.agents[0].spec.kappa_hat(0), 0.0);
  p.c_loc = 1.0;
  p.c_glob = 1.0;
  const AuctionInstance loose = gen_delivery(p);
  EXPECT_EQ(loose.rho_hat, (Bundle(4, 3)));
  EXPECT_EQ(loose.agents[0].spec.kappa_hat(0), 10.0);  // every resource affordable
}

TEST(Benchgen, DeliveryParameterSchedules) {
  EXPECT_DOUBLE_EQ(delivery_task_probability(1, 5), 0.5);
  EXPECT_DOUBLE_EQ(delivery_task_probability(5, 5), 0.1);
  EXPECT_DOUBLE_EQ(delivery_task_probability(1, 1), 0.5);
  EXPECT_DOUBLE_EQ(delivery_move_penalty(1, 4), -1.0);
  EXPECT_DOUBLE_EQ(delivery_move_penalty(4, 4), -10.0);
  EXPECT_DOUBLE_EQ(delivery_move_penalty(1, 1), -1.0);
}

TEST(Benchgen, DeliveryRejectsBadParameters) {
  DeliveryParams p;
  p.c_loc = 1.5;
  EXPECT_THROW(gen_delivery(p), InputError);
  p = DeliveryParams{};
  p.grid_n = 2;
  EXPECT_THROW(gen_delivery(p), InputError);
}

TEST(Benchgen, RandomInstancesAreValidAndSeeded) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RandomCmdpParams p;
    p.binary_rho = seed % 2 == 0;
    const ConstrainedMdp a = random_cmdp(p, seed), b = random_cmdp(p, seed);
    EXPECT_EQ(a.mdp.reward(), b.mdp.reward());
    EXPECT_EQ(a.spec.binary_rho(), p.binary_rho || a.spec.rho.maxCoeff() <= 1.0);
    EXPECT_NO_THROW(random_auction(RandomAuctionParams{}, seed).validate());
  }
}
