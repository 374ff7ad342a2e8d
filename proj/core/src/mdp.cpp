#include "mdpalloc/mdp.hpp"

#include <cmath>
#include <string>

#include "mdpalloc/errors.hpp"

namespace mdpalloc {

namespace {
constexpr double kConstructTol = 1e-9;
constexpr double kUnreachable = 1e-12;

void require(bool ok, const std::string& msg) {
  if (!ok) throw InputError(msg);
}

void check_shapes(const Mdp& mdp, const Policy& policy) {
  require(policy.probs.rows() == mdp.num_states() && policy.probs.cols() == mdp.num_actions(),
          "policy shape does not match the MDP");
}

// P_pi(s, sigma) and r_pi(s) for a stationary policy.
void policy_matrices(const Mdp& mdp, const Policy& policy, Eigen::MatrixXd& p, Eigen::VectorXd& r) {
  const Index ns = mdp.num_states();
  p = Eigen::MatrixXd::Zero(ns, ns);
  r = Eigen::VectorXd::Zero(ns);
  for (Index a = 0; a < mdp.num_actions(); ++a) {
    const Eigen::VectorXd w = policy.probs.col(a);
    p += w.asDiagonal() * mdp.transition(a);
    r += w.cwiseProduct(mdp.reward().col(a));
  }
}
}  // namespace

Mdp::Mdp(std::vector<Eigen::MatrixXd> transition, Eigen::MatrixXd reward, double discount,
         Eigen::VectorXd initial)
    : transition_(std::move(transition)),
      reward_(std::move(reward)),
      discount_(discount),
      initial_(std::move(initial)) {
  const Index ns = reward_.rows(), na = reward_.cols();
  require(ns > 0 && na > 0, "MDP needs at least one state and one action");
  require(static_cast<Index>(transition_.size()) == na, "one transition matrix per action required");
  require(discount_ >= 0.0 && discount_ < 1.0, "discount must lie in [0, 1)");
  require(initial_.size() == ns, "initial distribution size mismatch");
  require(reward_.allFinite(), "rewards must be finite");
  for (Index a = 0; a < na; ++a) {
    const auto& p = transition_[a];
    require(p.rows() == ns && p.cols() == ns, "transition matrix shape mismatch");
    require(p.allFinite() && p.minCoeff() >= 0.0 && p.maxCoeff() <= 1.0,
            "transition entries must lie in [0, 1]");
    for (Index s = 0; s < ns; ++s)
      require(std::abs(p.row(s).sum() - 1.0) <= kConstructTol,
              "transition row (s=" + std::to_string(s) + ", a=" + std::to_string(a) + ") is not stochastic");
  }
  require(initial_.allFinite() && initial_.minCoeff() >= 0.0, "initial distribution must be nonnegative");
  require(std::abs(initial_.sum() - 1.0) <= kConstructTol, "initial distribution must sum to 1");
}

Mdp Mdp::with_initial(Eigen::VectorXd initial) const {
  return Mdp(transition_, reward_, discount_, std::move(initial));
}

Mdp Mdp::with_reward(Eigen::MatrixXd reward) const {
  return Mdp(transition_, std::move(reward), discount_, initial_);
}

Policy Policy::deterministic(const std::vector<Index>& actions, Index num_actions) {
  Policy p;
  p.probs = Eigen::MatrixXd::Zero(static_cast<Index>(actions.size()), num_actions);
  for (std::size_t s = 0; s < actions.size(); ++s) p.probs(static_cast<Index>(s), actions[s]) = 1.0;
  return p;
}

bool Policy::is_deterministic(double tol) const {
  for (Index s = 0; s < probs.rows(); ++s) {
    int nonzero = 0;
    for (Index a = 0; a < probs.cols(); ++a)
      if (probs(s, a) > tol) ++nonzero;
    if (nonzero != 1) return false;
  }
  return true;
}

std::vector<Index> Policy::actions() const {
  std::vector<Index> out(probs.rows(), 0);
  for (Index s = 0; s < probs.rows(); ++s) {
    Index best = 0;
    for (Index a = 1; a < probs.cols(); ++a)
      if (probs(s, a) > probs(s, best)) best = a;
    out[s] = best;
  }
  return out;
}

void Policy::validate() const {
  require(probs.allFinite() && (probs.size() == 0 || probs.minCoeff() >= 0.0), "policy entries must be nonnegative");
  for (Index s = 0; s < probs.rows(); ++s)
    require(std::abs(probs.row(s).sum() - 1.0) <= kConstructTol, "policy rows must sum to 1");
}

OccupationMeasure OccupationMeasure::from_vector(const Eigen::VectorXd& v, Index ns, Index na) {
  require(v.size() == ns * na, "occupation vector size mismatch");
  OccupationMeasure o;
  o.x.resize(ns, na);
  for (Index s = 0; s < ns; ++s)
    for (Index a = 0; a < na; ++a) o.x(s, a) = v(s * na + a);
  return o;
}

Eigen::VectorXd OccupationMeasure::flat() const {
  Eigen::VectorXd v(x.size());
  for (Index s = 0; s < x.rows(); ++s)
    for (Index a = 0; a < x.cols(); ++a) v(s * x.cols() + a) = x(s, a);
  return v;
}

double OccupationMeasure::flow_residual(const Mdp& mdp) const {
  Eigen::VectorXd inflow = Eigen::VectorXd::Zero(mdp.num_states());
  for (Index a = 0; a < mdp.num_actions(); ++a) inflow += mdp.transition(a).transpose() * x.col(a);
  const Eigen::VectorXd r = x.rowwise().sum() - mdp.discount() * inflow - mdp.initial();
  return r.lpNorm<Eigen::Infinity>();
}

ValueFunction evaluate_policy(const Mdp& mdp, const Policy& policy) {
  check_shapes(mdp, policy);
  policy.validate();
  Eigen::MatrixXd p;
  Eigen::VectorXd r;
  policy_matrices(mdp, policy, p, r);
  const Index ns = mdp.num_states();
  const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(ns, ns) - mdp.discount() * p;
  return m.partialPivLu().solve(r);
}

double bellman_residual(const Mdp& mdp, const ValueFunction& v) {
  Eigen::MatrixXd q(mdp.num_states(), mdp.num_actions());
  for (Index a = 0; a < mdp.num_actions(); ++a)
    q.col(a) = mdp.reward().col(a) + mdp.discount() * mdp.transition(a) * v;
  return (q.rowwise().maxCoeff() - v).lpNorm<Eigen::Infinity>();
}

ValueFunction value_iteration(const Mdp& mdp, double tol) {
  require(tol > 0.0, "tolerance must be positive");
  const Index ns = mdp.num_states(), na = mdp.num_actions();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(ns);
  Eigen::MatrixXd q(ns, na);
  while (true) {
    for (Index a = 0; a < na; ++a) q.col(a) = mdp.reward().col(a) + mdp.discount() * mdp.transition(a) * v;
    Eigen::VectorXd next = q.rowwise().maxCoeff();
    const double resid = (next - v).lpNorm<Eigen::Infinity>();
    if (resid <= tol) return v;
    v = std::move(next);
  }
}

Policy greedy_policy(const Mdp& mdp, const ValueFunction& v) {
  require(v.size() == mdp.num_states() && v.allFinite(), "value function must be finite and sized |S|");
  const Index ns = mdp.num_states(), na = mdp.num_actions();
  std::vector<Index> act(ns, 0);
  for (Index s = 0; s < ns; ++s) {
    double best = -kInf;
    for (Index a = 0; a < na; ++a) {
      const double q = mdp.reward(s, a) + mdp.discount() * mdp.transition(a).row(s).dot(v);
      if (a == 0 || q > best + 1e-12 * (1.0 + std::abs(best))) {
        best = q;
        act[s] = a;
      }
    }
  }
  return Policy::deterministic(act, na);
}

LpProblem build_primal_lp(const Mdp& mdp) {
  const Index ns = mdp.num_states(), na = mdp.num_actions();
  LpProblem lp = LpProblem::nonnegative(ns, Sense::kMinimize);
  lp.objective = mdp.initial();
  lp.lower.setConstant(-kInf);
  lp.ineq_matrix = Eigen::MatrixXd::Zero(ns * na, ns);
  lp.ineq_rhs.resize(ns * na);
  for (Index s = 0; s < ns; ++s) {
    for (Index a = 0; a < na; ++a) {
      const Index row = mdp.column(s, a);
      // -(v(s) - gamma sum_sigma p v(sigma)) <= -r(s,a)
      lp.ineq_matrix.row(row) = mdp.discount() * mdp.transition(a).row(s);
      lp.ineq_matrix(row, s) -= 1.0;
      lp.ineq_rhs(row) = -mdp.reward(s, a);
    }
  }
  return lp;
}

LpProblem build_dual_lp(const Mdp& mdp, const std::vector<CostConstraint>& costs) {
  const Index ns = mdp.num_states(), na = mdp.num_actions();
  LpProblem lp = LpProblem::nonnegative(ns * na, Sense::kMaximize);
  lp.eq_matrix = Eigen::MatrixXd::Zero(ns, ns * na);
  lp.eq_rhs = mdp.initial();
  for (Index s = 0; s < ns; ++s) {
    for (Index a = 0; a < na; ++a) {
      const Index col = mdp.column(s, a);
      lp.objective(col) = mdp.reward(s, a);
      lp.eq_matrix.col(col) = -mdp.discount() * mdp.transition(a).row(s).transpose();
      lp.eq_matrix(s, col) += 1.0;
    }
  }
  lp.ineq_matrix = Eigen::MatrixXd::Zero(static_cast<Index>(costs.size()), ns * na);
  lp.ineq_rhs.resize(static_cast<Index>(costs.size()));
  for (std::size_t k = 0; k < costs.size(); ++k) {
    const auto& c = costs[k];
    require(c.cost.rows() == ns && c.cost.cols() == na, "cost matrix shape mismatch");
    require(std::isfinite(c.bound) && c.cost.allFinite(), "cost constraint must be finite");
    for (Index s = 0; s < ns; ++s)
      for (Index a = 0; a < na; ++a) lp.ineq_matrix(static_cast<Index>(k), mdp.column(s, a)) = c.cost(s, a);
    lp.ineq_rhs(static_cast<Index>(k)) = c.bound;
  }
  return lp;
}

Policy policy_from_occupation(const OccupationMeasure& occ) {
  require(occ.x.allFinite() && (occ.x.size() == 0 || occ.x.minCoeff() >= 0.0),
          "occupation measure must be nonnegative");
  Policy p;
  p.probs = Eigen::MatrixXd::Zero(occ.x.rows(), occ.x.cols());
  for (Index s = 0; s < occ.x.rows(); ++s) {
    const double total = occ.x.row(s).sum();
    if (total > kUnreachable)
      p.probs.row(s) = occ.x.row(s) / total;
    else
      p.probs(s, 0) = 1.0;
  }
  return p;
}

double policy_value(const Mdp& mdp, const Policy& policy) {
  return mdp.initial().dot(evaluate_policy(mdp, policy));
}

OccupationMeasure occupation_from_policy(const Mdp& mdp, const Policy& policy) {
  check_shapes(mdp, policy);
  Eigen::MatrixXd p;
  Eigen::VectorXd r;
  policy_matrices(mdp, policy, p, r);
  const Index ns = mdp.num_states();
  const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(ns, ns) - mdp.discount() * p.transpose();
  const Eigen::VectorXd mu = m.partialPivLu().solve(mdp.initial());
  OccupationMeasure o;
  o.x = mu.asDiagonal() * policy.probs;
  return o;
}

MdpSolution solve_mdp(const Mdp& mdp, const std::vector<CostConstraint>& costs) {
  const LpSolution sol = solve_lp(build_dual_lp(mdp, costs));
  if (sol.status != LpStatus::kOptimal) throw InputError("MDP dual LP is " + to_string(sol.status));
  MdpSolution out;
  out.value = sol.objective;
  out.occupation = OccupationMeasure::from_vector(sol.primal.cwiseMax(0.0), mdp.num_states(), mdp.num_actions());
  out.policy = policy_from_occupation(out.occupation);
  return out;
}

}  // namespace mdpalloc
