#include "mdpalloc/resource_model.hpp"

#include <cmath>

#include "mdpalloc/errors.hpp"

namespace mdpalloc {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw InputError(msg);
}

// Dual LP of the MDP extended by `extra` zero-bounded columns, no cost rows.
LpProblem flow_lp_with_extra(const Mdp& mdp, Index extra) {
  const LpProblem flow = build_dual_lp(mdp);
  const Index nx = flow.num_vars();
  LpProblem lp = LpProblem::nonnegative(nx + extra, Sense::kMaximize);
  lp.objective.head(nx) = flow.objective;
  lp.eq_matrix = Eigen::MatrixXd::Zero(flow.num_eq(), nx + extra);
  lp.eq_matrix.leftCols(nx) = flow.eq_matrix;
  lp.eq_rhs = flow.eq_rhs;
  for (Index k = nx; k < nx + extra; ++k) lp.upper(k) = 1.0;
  return lp;
}

void append_rows(LpProblem& lp, const Eigen::MatrixXd& rows, const Eigen::VectorXd& rhs) {
  const Index old = lp.num_ineq();
  Eigen::MatrixXd g(old + rows.rows(), lp.num_vars());
  if (old > 0) g.topRows(old) = lp.ineq_matrix;
  g.bottomRows(rows.rows()) = rows;
  Eigen::VectorXd h(old + rhs.size());
  h << lp.ineq_rhs, rhs;
  lp.ineq_matrix = std::move(g);
  lp.ineq_rhs = std::move(h);
}

ConstrainedSolution extract(const ConstrainedMdp& cmdp, const SingleAgentMilp& built, const MilpSolution& sol) {
  ConstrainedSolution out;
  out.status = sol.status;
  out.stats = sol.stats;
  if (sol.status != MilpStatus::kOptimal) return out;
  const Index ns = cmdp.mdp.num_states(), na = cmdp.mdp.num_actions();
  out.value = sol.objective;
  out.occupation = OccupationMeasure::from_vector(sol.x.head(built.layout.num_x).cwiseMax(0.0), ns, na);
  out.policy = policy_from_occupation(out.occupation);
  out.usage = policy_resource_usage(out.occupation, cmdp.spec);
  for (Index k = 0; k < built.layout.num_delta; ++k)
    out.indicators.push_back(static_cast<int>(std::lround(sol.x(built.layout.delta_offset + k))));
  return out;
}

}  // namespace

bool ResourceSpec::binary_rho() const {
  for (Index i = 0; i < rho.size(); ++i) {
    const double v = rho.data()[i];
    if (v != 0.0 && v != 1.0) return false;
  }
  return true;
}

void ResourceSpec::validate(Index num_actions) const {
  const Index no = num_resources(), nc = num_capacities();
  require(rho.rows() == num_actions, "rho must have one row per action");
  require(kappa.rows() == no && kappa.cols() == nc, "kappa must be |O| x |C|");
  require(resources.empty() || static_cast<Index>(resources.size()) == no, "resource name count mismatch");
  require(capacities.empty() || static_cast<Index>(capacities.size()) == nc, "capacity name count mismatch");
  require(rho.allFinite() && (rho.size() == 0 || rho.minCoeff() >= 0.0), "rho must be finite and nonnegative");
  require(kappa.allFinite() && (kappa.size() == 0 || kappa.minCoeff() >= 0.0), "kappa must be finite and nonnegative");
  require(kappa_hat.allFinite(), "kappa_hat must be finite");
}

ConstrainedMdp::ConstrainedMdp(Mdp m, ResourceSpec s) : mdp(std::move(m)), spec(std::move(s)) {
  spec.validate(mdp.num_actions());
}

Bundle policy_resource_usage(const OccupationMeasure& x, const ResourceSpec& spec) {
  const Index no = spec.num_resources();
  require(x.x.cols() == spec.rho.rows(), "occupation measure action count does not match rho");
  const Eigen::VectorXd action_mass = x.x.colwise().sum().transpose();
  Bundle b(no, 0);
  for (Index o = 0; o < no; ++o) {
    double need = 0.0;
    for (Index a = 0; a < spec.rho.rows(); ++a)
      if (action_mass(a) > kActivityThreshold) need = std::max(need, spec.rho(a, o));
    b[o] = static_cast<int>(std::ceil(need - 1e-9));
  }
  return b;
}

bool check_capacity(const Bundle& bundle, const ResourceSpec& spec) {
  require(static_cast<Index>(bundle.size()) == spec.num_resources(), "bundle size mismatch");
  for (Index c = 0; c < spec.num_capacities(); ++c) {
    double used = 0.0;
    for (Index o = 0; o < spec.num_resources(); ++o) used += spec.kappa(o, c) * bundle[o];
    if (used > spec.kappa_hat(c) + 1e-9) return false;
  }
  return true;
}

std::vector<char> allowed_actions(const ResourceSpec& spec, const Bundle& bundle) {
  require(static_cast<Index>(bundle.size()) == spec.num_resources(), "bundle size mismatch");
  std::vector<char> ok(spec.rho.rows(), 1);
  for (Index a = 0; a < spec.rho.rows(); ++a)
    for (Index o = 0; o < spec.num_resources(); ++o)
      if (spec.rho(a, o) > bundle[o] + 1e-12) ok[a] = 0;
  return ok;
}

SingleAgentMilp build_single_agent_milp(const ConstrainedMdp& cmdp, Normalization norm) {
  const ResourceSpec& spec = cmdp.spec;
  if (!spec.binary_rho())
    throw InputError("build_single_agent_milp needs binary rho; use build_single_agent_milp_nonbinary");
  const Mdp& mdp = cmdp.mdp;
  const Index ns = mdp.num_states(), na = mdp.num_actions();
  const Index no = spec.num_resources(), nc = spec.num_capacities();
  const Index nx = ns * na;

  SingleAgentMilp out;
  auto& L = out.layout;
  L.num_x = nx;
  L.delta_offset = nx;
  L.num_delta = no;
  L.flow_rows = ns;
  L.capacity_rows = nc;
  L.sync_rows = no;
  L.unpruned_capacity_rows = nc;

  LpProblem lp = flow_lp_with_extra(mdp, no);
  const double horizon = 1.0 / (1.0 - mdp.discount());
  const Eigen::VectorXd users = spec.rho.colwise().sum().transpose();
  const double global_x = horizon * (no > 0 ? users.maxCoeff() : 0.0);

  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(nc + no, nx + no);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nc + no);
  for (Index c = 0; c < nc; ++c) {
    for (Index o = 0; o < no; ++o) rows(c, nx + o) = spec.kappa(o, c);
    rhs(c) = spec.kappa_hat(c);
  }
  for (Index o = 0; o < no; ++o) {
    double x_norm = norm == Normalization::kGlobal ? global_x : horizon * users(o);
    if (x_norm <= 0.0) x_norm = 1.0;  // no action uses o
    L.normalization.push_back(x_norm);
    for (Index s = 0; s < ns; ++s)
      for (Index a = 0; a < na; ++a) rows(nc + o, mdp.column(s, a)) = spec.rho(a, o) / x_norm;
    rows(nc + o, nx + o) = -1.0;
  }
  append_rows(lp, rows, rhs);
  out.milp.base = std::move(lp);
  for (Index o = 0; o < no; ++o) out.milp.binary_vars.push_back(nx + o);
  return out;
}

SingleAgentMilp build_single_agent_milp_nonbinary(const ConstrainedMdp& cmdp) {
  const ResourceSpec& spec = cmdp.spec;
  const Mdp& mdp = cmdp.mdp;
  const Index ns = mdp.num_states(), na = mdp.num_actions();
  const Index no = spec.num_resources(), nc = spec.num_capacities();
  const Index nx = ns * na;

  SingleAgentMilp out;
  auto& L = out.layout;
  std::vector<Index> delta_of(na, -1);
  for (Index a = 0; a < na; ++a) {
    if (spec.rho.row(a).maxCoeff() > 0.0) {
      delta_of[a] = static_cast<Index>(L.delta_action.size());
      L.delta_action.push_back(a);
    }
  }
  const Index nd = static_cast<Index>(L.delta_action.size());
  std::vector<std::vector<Index>> users(no);
  for (Index o = 0; o < no; ++o)
    for (Index a = 0; a < na; ++a)
      if (spec.rho(a, o) > 0.0) users[o].push_back(a);

  Index combos = 1;
  double unpruned = static_cast<double>(nc);
  for (Index o = 0; o < no; ++o) {
    if (!users[o].empty()) combos *= static_cast<Index>(users[o].size());
    unpruned *= static_cast<double>(nd);
  }
  if (combos > 1'000'000) throw BlowupError("expanded capacity rows exceed 1e6");

  L.num_x = nx;
  L.delta_offset = nx;
  L.num_delta = nd;
  L.flow_rows = ns;
  L.capacity_rows = nc * combos;
  L.sync_rows = nd;
  L.unpruned_capacity_rows = static_cast<Index>(unpruned);

  LpProblem lp = flow_lp_with_extra(mdp, nd);
  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(L.capacity_rows + nd, nx + nd);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(L.capacity_rows + nd);
  Index r = 0;
  for (Index c = 0; c < nc; ++c) {
    std::vector<std::size_t> pick(no, 0);
    for (Index k = 0; k < combos; ++k, ++r) {
      for (Index o = 0; o < no; ++o) {
        if (users[o].empty()) continue;
        const Index a = users[o][pick[o]];
        rows(r, nx + delta_of[a]) += spec.kappa(o, c) * spec.rho(a, o);
      }
      rhs(r) = spec.kappa_hat(c);
      for (Index o = no - 1; o >= 0; --o) {  // odometer over the per-resource choices
        if (users[o].empty()) continue;
        if (++pick[o] < users[o].size()) break;
        pick[o] = 0;
      }
    }
  }
  const double horizon = 1.0 / (1.0 - mdp.discount());
  for (Index k = 0; k < nd; ++k, ++r) {
    const Index a = L.delta_action[k];
    for (Index s = 0; s < ns; ++s) rows(r, mdp.column(s, a)) = 1.0 / horizon;
    rows(r, nx + k) = -1.0;
    L.normalization.push_back(horizon);
  }
  append_rows(lp, rows, rhs);
  out.milp.base = std::move(lp);
  for (Index k = 0; k < nd; ++k) out.milp.binary_vars.push_back(nx + k);
  return out;
}

BundleValue bundle_value(const ConstrainedMdp& cmdp, const Bundle& bundle) {
  const std::vector<char> ok = allowed_actions(cmdp.spec, bundle);
  const Mdp& mdp = cmdp.mdp;
  const Index ns = mdp.num_states(), na = mdp.num_actions();
  BundleValue out;
  Eigen::VectorXd x;
  if (check_capacity(bundle, cmdp.spec)) {
    LpProblem lp = build_dual_lp(mdp);
    for (Index s = 0; s < ns; ++s)
      for (Index a = 0; a < na; ++a)
        if (!ok[a]) lp.upper(mdp.column(s, a)) = 0.0;
    const LpSolution sol = solve_lp(lp);
    if (sol.status != LpStatus::kOptimal) return out;
    out.value = sol.objective;
    x = sol.primal;
  } else {
    SingleAgentMilp built = cmdp.spec.binary_rho() ? build_single_agent_milp(cmdp)
                                                   : build_single_agent_milp_nonbinary(cmdp);
    for (Index s = 0; s < ns; ++s)
      for (Index a = 0; a < na; ++a)
        if (!ok[a]) built.milp.base.upper(mdp.column(s, a)) = 0.0;
    const MilpSolution sol = solve_milp(built.milp);
    if (sol.status != MilpStatus::kOptimal) return out;
    out.value = sol.objective;
    x = sol.x.head(ns * na);
  }
  out.feasible = true;
  out.occupation = OccupationMeasure::from_vector(x.cwiseMax(0.0), ns, na);
  out.policy = policy_from_occupation(out.occupation);
  return out;
}

std::vector<Bundle> feasible_bundles(const ResourceSpec& spec, const Bundle& global_bound) {
  const Index no = spec.num_resources();
  if (no > kMaxEnumeratedResources)
    throw BlowupError("bundle enumeration over " + std::to_string(no) + " resources exceeds the limit of 25");
  require(static_cast<Index>(global_bound.size()) == no, "global bound size mismatch");
  std::vector<Bundle> out;
  const std::uint64_t count = std::uint64_t{1} << no;
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    Bundle b(no, 0);
    bool within = true;
    for (Index o = 0; o < no; ++o) {
      b[o] = static_cast<int>((mask >> (no - 1 - o)) & 1U);
      if (b[o] > global_bound[o]) within = false;
    }
    if (within && check_capacity(b, spec)) out.push_back(std::move(b));
  }
  return out;
}

ConstrainedSolution solve_constrained(const ConstrainedMdp& cmdp, const ConstrainedOptions& options) {
  const bool nonbinary = options.nonbinary || !cmdp.spec.binary_rho();
  SingleAgentMilp built =
      nonbinary ? build_single_agent_milp_nonbinary(cmdp) : build_single_agent_milp(cmdp, options.norm);
  const MilpSolution sol = solve_milp(built.milp, options.milp);
  ConstrainedSolution out = extract(cmdp, built, sol);
  if (!options.minimal_bundle || sol.status != MilpStatus::kOptimal) return out;

  // keep the optimal value, minimize the number of indicators switched on
  SingleAgentMilp second = built;
  LpProblem& lp = second.milp.base;
  const double floor_value = sol.objective - 1e-7 * (1.0 + std::abs(sol.objective));
  Eigen::MatrixXd row = -lp.objective.transpose();
  append_rows(lp, row, Eigen::VectorXd::Constant(1, -floor_value));
  lp.objective.setZero();
  for (Index b : second.milp.binary_vars) lp.objective(b) = -1.0;
  const MilpSolution sol2 = solve_milp(second.milp, options.milp);
  if (sol2.status != MilpStatus::kOptimal) return out;
  // re-optimize the original objective inside the smaller bundle so the floor slack is not lost
  Fixings fix;
  for (Index b : built.milp.binary_vars) fix.emplace_back(b, static_cast<int>(std::lround(sol2.x(b))));
  MilpConfig polish_config = options.milp;
  polish_config.root_basis.clear();
  MilpSolution polished = BranchAndBound(built.milp, polish_config).solve(fix);
  if (polished.status != MilpStatus::kOptimal) return out;
  polished.stats.nodes += sol.stats.nodes + sol2.stats.nodes;
  polished.stats.lp_solves += sol.stats.lp_solves + sol2.stats.lp_solves;
  return extract(cmdp, built, polished);
}

}  // namespace mdpalloc
