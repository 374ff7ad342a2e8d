#include <functional>

#include <gtest/gtest.h>

#include <mdpalloc/auction.hpp>
#include <mdpalloc/benchgen.hpp>
#include <mdpalloc/errors.hpp>

#include "oracles.hpp"

using namespace mdpalloc;

namespace {

AuctionInstance small_auction(std::uint64_t seed) {
  RandomAuctionParams p;
  p.num_agents = 2 + static_cast<Index>(seed % 2);
  p.num_states = 2 + static_cast<Index>(seed % 3);
  p.num_actions = 3 + static_cast<Index>(seed % 2);
  p.num_resources = 2 + static_cast<Index>(seed % 3);
  return random_auction(p, seed);
}

struct Valued {
  Bundle bundle;
  double value;
};

// Each agent's capacity-feasible 0/1 bundles, valued by restricted value iteration.
std::vector<Valued> agent_menu(const ConstrainedMdp& agent) {
  const ResourceSpec& spec = agent.spec;
  const Index no = spec.num_resources(), na = agent.mdp.num_actions();
  std::vector<Valued> out;
  for (Index mask = 0; mask < (Index{1} << no); ++mask) {
    Bundle z(no);
    for (Index o = 0; o < no; ++o) z[o] = static_cast<int>((mask >> o) & 1);
    bool fits = true;
    for (Index c = 0; c < spec.num_capacities(); ++c) {
      double used = 0.0;
      for (Index o = 0; o < no; ++o) used += spec.kappa(o, c) * z[o];
      fits = fits && used <= spec.kappa_hat(c) + 1e-9;
    }
    if (!fits) continue;
    std::vector<char> allowed(na, 1);
    for (Index a = 0; a < na; ++a)
      for (Index o = 0; o < no; ++o)
        if (spec.rho(a, o) > z[o]) allowed[a] = 0;
    out.push_back({z, agent.mdp.initial().dot(oracle::value_iteration(agent.mdp, allowed))});
  }
  return out;
}

// Best total value over every joint bundle choice within the supply.
double welfare_oracle(const AuctionInstance& inst) {
  std::vector<std::vector<Valued>> menus;
  for (const auto& a : inst.agents) menus.push_back(agent_menu(a));
  double best = -kInf;
  Bundle used(inst.num_resources(), 0);
  std::function<void(std::size_t, double)> rec = [&](std::size_t m, double acc) {
    if (m == menus.size()) {
      best = std::max(best, acc);
      return;
    }
    for (const Valued& v : menus[m]) {
      bool ok = true;
      for (Index o = 0; o < inst.num_resources(); ++o) ok = ok && used[o] + v.bundle[o] <= inst.rho_hat[o];
      if (!ok) continue;
      for (Index o = 0; o < inst.num_resources(); ++o) used[o] += v.bundle[o];
      rec(m + 1, acc + v.value);
      for (Index o = 0; o < inst.num_resources(); ++o) used[o] -= v.bundle[o];
    }
  };
  rec(0, 0.0);
  return best;
}

}  // namespace

TEST(Auction, WdpMatchesJointBundleOracle) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const AuctionInstance inst = small_auction(seed);
    const Allocation a = solve_wdp(inst);
    EXPECT_NEAR(a.welfare, welfare_oracle(inst), 1e-6) << "seed " << seed;
  }
}

TEST(Auction, WdpMatchesFlatBaseline) {
  for (std::uint64_t seed = 100; seed < 115; ++seed) {
    const AuctionInstance inst = small_auction(seed);
    const Allocation a = solve_wdp(inst);
    const Allocation b = flat_wdp(inst);
    EXPECT_NEAR(a.welfare, b.welfare, 1e-6) << "seed " << seed;
  }
}

TEST(Auction, AllocationsRespectSupplyAndCapacity) {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    const AuctionInstance inst = small_auction(seed);
    const Allocation a = solve_wdp(inst);
    Bundle total(inst.num_resources(), 0);
    double sum = 0.0;
    for (Index m = 0; m < inst.num_agents(); ++m) {
      const auto& ag = a.agents[m];
      EXPECT_TRUE(check_capacity(ag.bundle, inst.agents[m].spec)) << "seed " << seed;
      for (Index o = 0; o < inst.num_resources(); ++o) {
        total[o] += ag.bundle[o];
        EXPECT_LE(ag.usage[o], ag.bundle[o]) << "policy uses an unallocated resource, seed " << seed;
      }
      EXPECT_NEAR(policy_value(inst.agents[m].mdp, ag.policy), ag.value, 1e-6) << "seed " << seed;
      EXPECT_TRUE(ag.policy.is_deterministic(1e-9)) << "seed " << seed;
      sum += ag.value;
    }
    for (Index o = 0; o < inst.num_resources(); ++o) EXPECT_LE(total[o], inst.rho_hat[o]);
    EXPECT_NEAR(sum, a.welfare, 1e-6);
  }
}

TEST(Auction, BinaryVariableCounts) {
  const AuctionInstance inst = small_auction(4);
  const Allocation a = solve_wdp(inst);
  const Allocation b = flat_wdp(inst);
  EXPECT_EQ(a.stats.binary_vars, inst.num_agents() * inst.num_resources());
  Index expect = 0;
  for (const auto& agent : inst.agents) expect += static_cast<Index>(feasible_bundles(agent.spec, inst.rho_hat).size());
  EXPECT_EQ(b.stats.binary_vars, expect);
}

TEST(Auction, TieBreakIsDeterministic) {
  const AuctionInstance inst = small_auction(7);
  const Allocation a = solve_wdp(inst), b = solve_wdp(inst);
  for (Index m = 0; m < inst.num_agents(); ++m) EXPECT_EQ(a.agents[m].bundle, b.agents[m].bundle);
  WdpOptions off;
  off.lexicographic_tiebreak = false;
  EXPECT_NEAR(solve_wdp(inst, off).welfare, a.welfare, 1e-6);
}

TEST(Auction, FlatBaselineRefusesLargeResourceSets) {
  DeliveryParams p;
  p.grid_n = 3;
  p.num_agents = 1;
  p.num_resources = 26;
  EXPECT_THROW(flat_wdp(gen_delivery(p)), BlowupError);
}

TEST(Auction, VcgPropertiesOnRandomInstances) {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const AuctionInstance inst = small_auction(seed);
    const VcgResult v = vcg_payments(inst);
    double others_total = v.allocation.welfare;
    for (Index m = 0; m < inst.num_agents(); ++m) {
      const double others = others_total - v.allocation.agents[m].value;
      EXPECT_NEAR(v.payments[m], v.welfare_without[m] - others, 1e-6);
      EXPECT_GE(v.payments[m], -1e-9) << "seed " << seed;
      EXPECT_GE(v.allocation.agents[m].value - v.payments[m] - v.null_values[m], -1e-6) << "seed " << seed;
      EXPECT_NEAR(v.welfare_without[m], welfare_oracle(inst.without_agent(m)), 1e-6) << "seed " << seed;
    }
  }
}

TEST(DeliveryExample, WdpDimensions) {
  const WdpMilp w = build_wdp_milp(delivery_example_auction());
  EXPECT_EQ(w.layout.num_continuous(), 30);
  EXPECT_EQ(w.layout.num_binary(), 6);
  EXPECT_EQ(w.layout.flow_rows, 6);
  // |M||C| capacity + |O| supply + |M||O| synchronization
  EXPECT_EQ(w.layout.capacity_rows + w.layout.global_rows + w.layout.sync_rows, 2 + 3 + 6);
}

TEST(DeliveryExample, AuctionOutcomeAndPayments) {
  const AuctionInstance inst = delivery_example_auction();
  const VcgResult v = vcg_payments(inst);
  EXPECT_NEAR(v.allocation.welfare, welfare_oracle(inst), 1e-6);
  EXPECT_NEAR(v.allocation.welfare, 50.0 + bundle_value(inst.agents[1], {1, 1, 0}).value, 1e-6);
  EXPECT_EQ(v.allocation.agents[0].bundle, (Bundle{1, 0, 0}));
  EXPECT_EQ(v.allocation.agents[1].bundle, (Bundle{1, 1, 0}));
  // agent 1 alone would earn its best capacity-feasible value; agent 0 is not pivotal
  EXPECT_NEAR(v.payments[0], 0.0, 1e-6);
  EXPECT_NEAR(v.payments[1], bundle_value(inst.agents[0], {1, 1, 0}).value - 50.0, 1e-6);
  const Allocation flat = flat_wdp(inst);
  EXPECT_NEAR(flat.welfare, v.allocation.welfare, 1e-6);
  EXPECT_EQ(flat.stats.enumerated_bundles, 16);
}
