#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mdpalloc/mdp.hpp"
#include "mdpalloc/milp.hpp"

namespace mdpalloc {

struct ResourceSpec {
  std::vector<std::string> resources;   // O
  std::vector<std::string> capacities;  // C
  Eigen::MatrixXd rho;                  // |A| x |O|
  Eigen::MatrixXd kappa;                // |O| x |C|
  Eigen::VectorXd kappa_hat;            // |C|

  Index num_resources() const { return rho.cols(); }
  Index num_capacities() const { return kappa_hat.size(); }
  bool binary_rho() const;
  void validate(Index num_actions) const;
};

struct ConstrainedMdp {
  ConstrainedMdp(Mdp mdp, ResourceSpec spec);
  Mdp mdp;
  ResourceSpec spec;
};

using Bundle = std::vector<int>;

// Activity threshold on occupation mass below which an action counts as unused.
inline constexpr double kActivityThreshold = 1e-9;

// Binary rho: H of the per-resource mass. General rho: max over active actions,
// rounded up to whole units.
Bundle policy_resource_usage(const OccupationMeasure& x, const ResourceSpec& spec);
bool check_capacity(const Bundle& bundle, const ResourceSpec& spec);
// Actions whose every requirement fits inside the bundle.
std::vector<char> allowed_actions(const ResourceSpec& spec, const Bundle& bundle);

enum class Normalization { kPerResource, kGlobal };

struct SingleAgentLayout {
  Index num_x = 0;           // x(s,a) occupies columns [0, num_x)
  Index delta_offset = 0;    // binaries occupy [delta_offset, delta_offset + num_delta)
  Index num_delta = 0;
  Index flow_rows = 0;
  Index capacity_rows = 0;
  Index sync_rows = 0;
  Index unpruned_capacity_rows = 0;
  std::vector<Index> delta_action;  // non-binary builder: action behind each binary
  std::vector<double> normalization;

  Index num_rows() const { return flow_rows + capacity_rows + sync_rows; }
};

struct SingleAgentMilp {
  MilpProblem milp;
  SingleAgentLayout layout;
};

// Binary rho: x plus one delta per resource; flow, capacity and sync rows.
SingleAgentMilp build_single_agent_milp(const ConstrainedMdp& cmdp,
                                        Normalization norm = Normalization::kPerResource);
// General rho: one binary per resource-using action and the expanded max rows.
SingleAgentMilp build_single_agent_milp_nonbinary(const ConstrainedMdp& cmdp);

struct BundleValue {
  bool feasible = false;
  double value = -kInf;
  Policy policy;
  OccupationMeasure occupation;
};

// Optimal value using only actions the bundle enables. Bundles over the agent's
// capacity are valued by the best capacity-feasible behaviour inside them.
BundleValue bundle_value(const ConstrainedMdp& cmdp, const Bundle& bundle);

// Capacity-feasible 0/1 bundles below `global_bound`, lexicographic order.
std::vector<Bundle> feasible_bundles(const ResourceSpec& spec, const Bundle& global_bound);
inline constexpr Index kMaxEnumeratedResources = 25;

struct ConstrainedOptions {
  Normalization norm = Normalization::kPerResource;
  bool nonbinary = false;
  bool minimal_bundle = false;  // second pass minimizing sum(delta)
  MilpConfig milp;
};

struct ConstrainedSolution {
  MilpStatus status = MilpStatus::kInfeasible;
  double value = 0.0;
  OccupationMeasure occupation;
  Policy policy;
  Bundle usage;                // from x
  std::vector<int> indicators; // binaries as solved
  MilpStats stats;
};

ConstrainedSolution solve_constrained(const ConstrainedMdp& cmdp, const ConstrainedOptions& options = {});

}  // namespace mdpalloc
