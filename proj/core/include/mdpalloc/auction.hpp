#pragma once

#include <string>
#include <vector>

#include "mdpalloc/resource_model.hpp"

namespace mdpalloc {

struct AuctionInstance {
  std::vector<ConstrainedMdp> agents;
  Eigen::MatrixXd kappa;  // shared |O| x |C|
  Bundle rho_hat;         // global supply per resource
  double discount = 0.95;
  std::vector<std::string> resources;
  std::vector<std::string> capacities;

  Index num_agents() const { return static_cast<Index>(agents.size()); }
  Index num_resources() const { return static_cast<Index>(rho_hat.size()); }
  void validate() const;
  AuctionInstance without_agent(Index m) const;
};

// One agent's contribution to the winner-determination MILP, expressed over
// generic columns so that transformed (encrypted) bids fit the same builder.
struct AgentBid {
  LpProblem flow;                    // maximize, equality rows, columns >= 0
  std::vector<Index> column_action;  // action behind each column
  Eigen::MatrixXd rho;               // |A| x |O|
  Eigen::MatrixXd kappa;             // |O| x |C|
  Eigen::VectorXd kappa_hat;         // |C|
  double mass_bound = 0.0;           // upper bound on the sum of the columns
};

AgentBid plain_bid(const ConstrainedMdp& agent);

struct WdpLayout {
  std::vector<Index> column_offset;  // per agent
  std::vector<Index> num_columns;
  std::vector<Index> delta_offset;   // per agent, |O| consecutive binaries
  Index num_resources = 0;
  Index flow_rows = 0;
  Index capacity_rows = 0;
  Index global_rows = 0;
  Index sync_rows = 0;

  Index num_continuous() const;
  Index num_binary() const;
};

struct WdpMilp {
  MilpProblem milp;
  WdpLayout layout;
};

WdpMilp build_wdp_milp(const AuctionInstance& instance);
WdpMilp build_wdp_milp(const std::vector<AgentBid>& bids, const Bundle& rho_hat);

struct AgentAllocation {
  Bundle bundle;              // indicators as allocated
  Bundle usage;               // resources the policy actually touches
  Eigen::VectorXd columns;    // raw column values of this agent's block
  OccupationMeasure occupation;
  Policy policy;
  double value = 0.0;
};

struct AllocationStats {
  MilpStats milp;
  Index binary_vars = 0;
  Index enumerated_bundles = 0;  // flat baseline: 2^|O| per agent before capacity pruning
  Index valuation_solves = 0;
};

struct Allocation {
  std::vector<AgentAllocation> agents;
  double welfare = 0.0;
  AllocationStats stats;
};

struct WdpOptions {
  // Among welfare-optimal allocations pick the lexicographically smallest
  // indicator matrix (agent-major).
  bool lexicographic_tiebreak = true;
  MilpConfig milp;
};

Allocation solve_wdp(const AuctionInstance& instance, const WdpOptions& options = {});
// Same MILP over generic bids; occupation/policy are left empty, `columns` set.
Allocation solve_wdp_bids(const std::vector<AgentBid>& bids, const Bundle& rho_hat,
                          const WdpOptions& options = {});
// Allocation read off a WDP MILP solution; policies are left empty.
Allocation decode_allocation(const std::vector<AgentBid>& bids, const WdpLayout& layout, const MilpSolution& sol);
// Occupation measures and policies from plain-bid columns.
void attach_policies(const AuctionInstance& instance, Allocation& alloc);
// Bundle enumeration baseline with the assignment integer program.
Allocation flat_wdp(const AuctionInstance& instance, const WdpOptions& options = {});

struct VcgResult {
  Allocation allocation;
  std::vector<double> payments;
  std::vector<double> welfare_without;  // V*_{-m}
  std::vector<double> null_values;      // value of the empty bundle per agent
};

VcgResult vcg_payments(const AuctionInstance& instance, const WdpOptions& options = {});

}  // namespace mdpalloc
