#pragma once

#include <vector>

#include <Eigen/Dense>

#include "mdpalloc/lp.hpp"

namespace mdpalloc {

// Finite discounted MDP. Transition rows are stored per action:
// transition[a](s, sigma) = p(sigma | s, a).
class Mdp {
 public:
  Mdp(std::vector<Eigen::MatrixXd> transition, Eigen::MatrixXd reward, double discount,
      Eigen::VectorXd initial);

  Index num_states() const { return reward_.rows(); }
  Index num_actions() const { return reward_.cols(); }
  double discount() const { return discount_; }
  const Eigen::MatrixXd& reward() const { return reward_; }
  double reward(Index s, Index a) const { return reward_(s, a); }
  const Eigen::MatrixXd& transition(Index a) const { return transition_[a]; }
  double p(Index sigma, Index s, Index a) const { return transition_[a](s, sigma); }
  const Eigen::VectorXd& initial() const { return initial_; }

  // Same dynamics, different initial distribution.
  Mdp with_initial(Eigen::VectorXd initial) const;
  Mdp with_reward(Eigen::MatrixXd reward) const;
  // Occupation-measure column index of (s, a).
  Index column(Index s, Index a) const { return s * num_actions() + a; }

 private:
  std::vector<Eigen::MatrixXd> transition_;
  Eigen::MatrixXd reward_;
  double discount_;
  Eigen::VectorXd initial_;
};

struct Policy {
  Eigen::MatrixXd probs;  // |S| x |A|

  static Policy deterministic(const std::vector<Index>& actions, Index num_actions);
  bool is_deterministic(double tol = 0.0) const;
  // Action with the largest probability in each state (lowest index on ties).
  std::vector<Index> actions() const;
  void validate() const;
};

struct OccupationMeasure {
  Eigen::MatrixXd x;  // |S| x |A|

  static OccupationMeasure from_vector(const Eigen::VectorXd& v, Index num_states, Index num_actions);
  Eigen::VectorXd flat() const;
  double total() const { return x.sum(); }
  // Largest per-state flow-conservation residual for `mdp`.
  double flow_residual(const Mdp& mdp) const;
};

using ValueFunction = Eigen::VectorXd;

struct CostConstraint {
  Eigen::MatrixXd cost;  // |S| x |A|
  double bound = 0.0;
};

ValueFunction evaluate_policy(const Mdp& mdp, const Policy& policy);
ValueFunction value_iteration(const Mdp& mdp, double tol = 1e-8);
double bellman_residual(const Mdp& mdp, const ValueFunction& v);
// Deterministic; ties go to the lowest action index.
Policy greedy_policy(const Mdp& mdp, const ValueFunction& v);
// min alpha^T v  s.t.  v(s) >= r(s,a) + gamma sum p v, expressed as <= rows.
LpProblem build_primal_lp(const Mdp& mdp);
// max r^T x  s.t. flow conservation (|S| equality rows), one <= row per cost, x >= 0.
LpProblem build_dual_lp(const Mdp& mdp, const std::vector<CostConstraint>& costs = {});
// Unreachable states (mass <= 1e-12) get action 0.
Policy policy_from_occupation(const OccupationMeasure& x);
double policy_value(const Mdp& mdp, const Policy& policy);
// Discounted state-action visit counts induced by `policy` from mdp.initial().
OccupationMeasure occupation_from_policy(const Mdp& mdp, const Policy& policy);

struct MdpSolution {
  double value = 0.0;
  OccupationMeasure occupation;
  Policy policy;
};
// Dual-LP solve with policy extraction. Throws InputError if the LP is infeasible.
MdpSolution solve_mdp(const Mdp& mdp, const std::vector<CostConstraint>& costs = {});

}  // namespace mdpalloc
