#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "mdpalloc/auction.hpp"

namespace mdpalloc {

struct DeliveryParams {
  Index grid_n = 5;
  Index num_agents = 3;
  Index num_resources = 4;
  double c_glob = 0.5;
  double c_loc = 0.5;
  Index resources_per_action = 2;
  std::uint64_t seed = 0;

  void validate() const;
};

inline constexpr double kDeliveryDiscount = 0.95;

// Grid delivery world. States are grid cells (row-major), actions are the four
// moves (N, S, W, E) followed by one delivery action per resource type.
AuctionInstance gen_delivery(const DeliveryParams& params);

// Availability probability of task i (1-based) and movement penalty of agent m (1-based).
double delivery_task_probability(Index i, Index num_resources);
double delivery_move_penalty(Index m, Index num_agents);

using UtilityFn = std::function<double(const Bundle&)>;

// MDP whose induced bundle utility equals f over [0, m]^n. States are the bundles
// in mixed radix (resource 0 fastest) followed by the sink; action 0 collects
// the bundle's reward, action 1 + i*m + (j-1) acquires unit j of resource i.
ConstrainedMdp gen_from_utility(const UtilityFn& f, int m, Index n, double discount = 0.9);
Index utility_state(const Bundle& z, int m);

struct KnapsackItem {
  double cost = 0.0;
  double value = 0.0;
};

struct KnapsackInstance {
  std::vector<KnapsackItem> items;
  double bound = 0.0;  // c-hat

  void validate() const;  // costs must be positive integers
};

struct KnapsackMdp {
  ConstrainedMdp cmdp;
  double expected_optimum = 0.0;
};

KnapsackMdp gen_from_knapsack(const KnapsackInstance& instance, double discount);
double knapsack_dp(const KnapsackInstance& instance);
KnapsackInstance random_knapsack(std::uint64_t seed, Index max_items = 12);

struct RandomCmdpParams {
  Index num_states = 5;
  Index num_actions = 4;  // action 0 is a costless noop
  Index num_resources = 3;
  Index num_capacities = 1;
  double discount = 0.9;
  bool binary_rho = true;
  int max_rho = 2;  // largest requirement when rho is not binary
};

ConstrainedMdp random_cmdp(const RandomCmdpParams& params, std::uint64_t seed);

struct RandomAuctionParams {
  Index num_agents = 2;
  Index num_states = 4;
  Index num_actions = 4;
  Index num_resources = 3;
  Index num_capacities = 1;
  double discount = 0.9;
};

AuctionInstance random_auction(const RandomAuctionParams& params, std::uint64_t seed);

// Three-state delivery example: the truck/forklift/mechanic agent with the
// appliance reward set to `appliance_reward` and the given initial state.
ConstrainedMdp delivery_example_agent(double appliance_reward = 10.0, Index initial_state = 0);
// Two agents sharing two trucks, one forklift and one mechanic; agent 2 earns 12 per
// appliance delivery.
AuctionInstance delivery_example_auction();

}  // namespace mdpalloc
