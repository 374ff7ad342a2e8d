#include "mdpalloc/auction.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mdpalloc/errors.hpp"

namespace mdpalloc {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw InputError(msg);
}

Bundle round_bundle(const Eigen::VectorXd& x, Index offset, Index count) {
  Bundle b(count, 0);
  for (Index o = 0; o < count; ++o) b[o] = static_cast<int>(std::lround(x(offset + o)));
  return b;
}

// Extra row objective^T x >= floor keeps later passes on the optimal face.
// Each agent's own optimal flow basis, with every coupling row slack basic.
// Coupling duals are then zero, so the basis is dual feasible for the WDP.
std::vector<Index> crash_basis(const std::vector<AgentBid>& bids, const LpProblem& lp) {
  std::vector<Index> basis;
  const Index nvars = lp.num_vars();
  Index col0 = 0, row0 = 0;
  for (const auto& b : bids) {
    const LpSolution sol = solve_lp(b.flow);
    if (sol.status != LpStatus::kOptimal) return {};
    const Index nj = b.flow.num_vars();
    for (Index k : sol.basis) basis.push_back(k < nj ? col0 + k : nvars + row0 + (k - nj));
    col0 += nj;
    row0 += b.flow.num_eq();
  }
  for (Index i = 0; i < lp.num_ineq(); ++i) basis.push_back(nvars + lp.num_eq() + i);
  return basis;
}

// Greedy fixing of the binaries in order; each stays 0 when some optimal
// allocation agrees with the prefix fixed so far.
MilpSolution lexicographic_pass(BranchAndBound& bnb, const MilpSolution& first) {
  const MilpProblem& p = bnb.problem();
  const double floor_value = first.objective - 1e-7 * (1.0 + std::abs(first.objective));
  Fixings fixed;
  MilpSolution current = first;
  MilpStats total = first.stats;
  for (Index b : p.binary_vars) {
    if (std::lround(current.x(b)) == 0) {
      fixed.emplace_back(b, 0);
      continue;
    }
    Fixings trial = fixed;
    trial.emplace_back(b, 0);
    const MilpSolution sol = bnb.solve(trial, floor_value);
    total.nodes += sol.stats.nodes;
    total.lp_solves += sol.stats.lp_solves;
    total.warm_solves += sol.stats.warm_solves;
    if (sol.status == MilpStatus::kOptimal) {
      fixed = std::move(trial);
      current = sol;
    } else {
      fixed.emplace_back(b, 1);
    }
  }
  current.objective = p.base.objective.dot(current.x);
  current.stats = total;
  return current;
}

}  // namespace

void AuctionInstance::validate() const {
  const Index no = num_resources();
  for (int v : rho_hat) require(v >= 0, "rho_hat entries must be nonnegative");
  for (std::size_t m = 0; m < agents.size(); ++m) {
    const auto& a = agents[m];
    require(a.spec.num_resources() == no, "agent " + std::to_string(m) + " has a different resource count");
    require(a.spec.kappa.rows() == kappa.rows() && a.spec.kappa.cols() == kappa.cols(),
            "agent " + std::to_string(m) + " kappa shape differs from the shared kappa");
    require(a.mdp.num_states() == agents[0].mdp.num_states() && a.mdp.num_actions() == agents[0].mdp.num_actions(),
            "agents must share state and action spaces");
    if (!a.spec.binary_rho()) throw InputError("winner determination needs binary rho for every agent");
  }
}

AuctionInstance AuctionInstance::without_agent(Index m) const {
  AuctionInstance out = *this;
  out.agents.erase(out.agents.begin() + m);
  return out;
}

Index WdpLayout::num_continuous() const {
  return std::accumulate(num_columns.begin(), num_columns.end(), Index{0});
}

Index WdpLayout::num_binary() const { return static_cast<Index>(delta_offset.size()) * num_resources; }

AgentBid plain_bid(const ConstrainedMdp& agent) {
  AgentBid b;
  b.flow = build_dual_lp(agent.mdp);
  const Index na = agent.mdp.num_actions();
  for (Index j = 0; j < b.flow.num_vars(); ++j) b.column_action.push_back(j % na);
  b.rho = agent.spec.rho;
  b.kappa = agent.spec.kappa;
  b.kappa_hat = agent.spec.kappa_hat;
  b.mass_bound = 1.0 / (1.0 - agent.mdp.discount());
  return b;
}

WdpMilp build_wdp_milp(const std::vector<AgentBid>& bids, const Bundle& rho_hat) {
  const Index nm = static_cast<Index>(bids.size());
  const Index no = static_cast<Index>(rho_hat.size());
  WdpMilp out;
  WdpLayout& L = out.layout;
  L.num_resources = no;
  Index ncols = 0, neq = 0, ncap = 0;
  for (const auto& b : bids) {
    require(b.flow.num_ineq() == 0, "bid flow LP must contain equality rows only");
    require(static_cast<Index>(b.column_action.size()) == b.flow.num_vars(), "column_action size mismatch");
    require(b.rho.cols() == no, "bid resource count mismatch");
    require(b.kappa.rows() == no && b.kappa.cols() == b.kappa_hat.size(), "bid kappa shape mismatch");
    require(b.mass_bound > 0.0, "bid mass bound must be positive");
    L.column_offset.push_back(ncols);
    L.num_columns.push_back(b.flow.num_vars());
    ncols += b.flow.num_vars();
    neq += b.flow.num_eq();
    ncap += b.kappa_hat.size();
  }
  const Index nvars = ncols + nm * no;
  for (Index m = 0; m < nm; ++m) L.delta_offset.push_back(ncols + m * no);
  L.flow_rows = neq;
  L.capacity_rows = ncap;
  L.global_rows = no;
  L.sync_rows = nm * no;

  LpProblem lp = LpProblem::nonnegative(nvars, Sense::kMaximize);
  lp.eq_matrix = Eigen::MatrixXd::Zero(neq, nvars);
  lp.eq_rhs.resize(neq);
  const Index nineq = ncap + no + nm * no;
  lp.ineq_matrix = Eigen::MatrixXd::Zero(nineq, nvars);
  lp.ineq_rhs = Eigen::VectorXd::Zero(nineq);
  Index eq_row = 0, cap_row = 0;
  const Index global_row0 = ncap, sync_row0 = ncap + no;
  for (Index m = 0; m < nm; ++m) {
    const AgentBid& b = bids[m];
    const Index off = L.column_offset[m];
    const Index nj = b.flow.num_vars();
    lp.objective.segment(off, nj) = b.flow.objective;
    lp.upper.segment(off, nj) = b.flow.upper;
    lp.eq_matrix.block(eq_row, off, b.flow.num_eq(), nj) = b.flow.eq_matrix;
    lp.eq_rhs.segment(eq_row, b.flow.num_eq()) = b.flow.eq_rhs;
    eq_row += b.flow.num_eq();
    for (Index c = 0; c < b.kappa_hat.size(); ++c, ++cap_row) {
      for (Index o = 0; o < no; ++o) lp.ineq_matrix(cap_row, L.delta_offset[m] + o) = b.kappa(o, c);
      lp.ineq_rhs(cap_row) = b.kappa_hat(c);
    }
    for (Index o = 0; o < no; ++o) {
      const Index d = L.delta_offset[m] + o;
      lp.upper(d) = 1.0;
      lp.ineq_matrix(global_row0 + o, d) = 1.0;
      double users = 0.0;
      for (Index a = 0; a < b.rho.rows(); ++a) users += b.rho(a, o);
      const double x_norm = users > 0.0 ? b.mass_bound * users : 1.0;
      const Index row = sync_row0 + m * no + o;
      for (Index j = 0; j < nj; ++j) lp.ineq_matrix(row, off + j) = b.rho(b.column_action[j], o) / x_norm;
      lp.ineq_matrix(row, d) = -1.0;
      out.milp.binary_vars.push_back(d);
    }
  }
  for (Index o = 0; o < no; ++o) lp.ineq_rhs(global_row0 + o) = rho_hat[o];
  out.milp.base = std::move(lp);
  return out;
}

WdpMilp build_wdp_milp(const AuctionInstance& instance) {
  instance.validate();
  std::vector<AgentBid> bids;
  for (const auto& a : instance.agents) bids.push_back(plain_bid(a));
  return build_wdp_milp(bids, instance.rho_hat);
}

Allocation solve_wdp_bids(const std::vector<AgentBid>& bids, const Bundle& rho_hat, const WdpOptions& options) {
  const WdpMilp w = build_wdp_milp(bids, rho_hat);
  MilpConfig cfg = options.milp;
  if (cfg.warm_start && !cfg.relaxation && cfg.root_basis.empty()) cfg.root_basis = crash_basis(bids, w.milp.base);
  BranchAndBound bnb(w.milp, cfg);
  MilpSolution sol = bnb.solve();
  if (sol.status != MilpStatus::kOptimal) throw InputError("winner determination MILP is infeasible");
  if (options.lexicographic_tiebreak) sol = lexicographic_pass(bnb, sol);
  return decode_allocation(bids, w.layout, sol);
}

Allocation decode_allocation(const std::vector<AgentBid>& bids, const WdpLayout& layout, const MilpSolution& sol) {
  if (sol.status != MilpStatus::kOptimal) throw InputError("winner determination MILP is infeasible");
  Allocation out;
  out.stats.milp = sol.stats;
  out.stats.binary_vars = layout.num_binary();
  for (std::size_t m = 0; m < bids.size(); ++m) {
    AgentAllocation a;
    const Index off = layout.column_offset[m], nj = layout.num_columns[m];
    a.columns = sol.x.segment(off, nj).cwiseMax(0.0);
    a.bundle = round_bundle(sol.x, layout.delta_offset[m], layout.num_resources);
    a.usage.assign(layout.num_resources, 0);
    for (Index o = 0; o < layout.num_resources; ++o) {
      double mass = 0.0;
      for (Index j = 0; j < nj; ++j) mass += bids[m].rho(bids[m].column_action[j], o) * a.columns(j);
      a.usage[o] = mass > kActivityThreshold ? 1 : 0;
    }
    a.value = bids[m].flow.objective.dot(sol.x.segment(off, nj));
    out.welfare += a.value;
    out.agents.push_back(std::move(a));
  }
  return out;
}

void attach_policies(const AuctionInstance& instance, Allocation& alloc) {
  for (std::size_t m = 0; m < instance.agents.size(); ++m) {
    const Mdp& mdp = instance.agents[m].mdp;
    auto& a = alloc.agents[m];
    a.occupation = OccupationMeasure::from_vector(a.columns, mdp.num_states(), mdp.num_actions());
    a.policy = policy_from_occupation(a.occupation);
  }
}

Allocation solve_wdp(const AuctionInstance& instance, const WdpOptions& options) {
  instance.validate();
  std::vector<AgentBid> bids;
  for (const auto& a : instance.agents) bids.push_back(plain_bid(a));
  Allocation out = solve_wdp_bids(bids, instance.rho_hat, options);
  attach_policies(instance, out);
  return out;
}

Allocation flat_wdp(const AuctionInstance& instance, const WdpOptions& options) {
  instance.validate();
  const Index nm = instance.num_agents(), no = instance.num_resources();
  if (no > kMaxEnumeratedResources)
    throw BlowupError("flat winner determination over " + std::to_string(no) + " resources exceeds the limit of 25");
  Bundle unit_bound(no);
  for (Index o = 0; o < no; ++o) unit_bound[o] = std::min(1, instance.rho_hat[o]);

  struct Candidate {
    Bundle bundle;
    BundleValue value;
  };
  std::vector<std::vector<Candidate>> cands(nm);
  std::vector<double> baseline(nm, 0.0);
  std::vector<bool> must_take(nm, false);
  Allocation out;
  out.stats.enumerated_bundles = nm * (Index{1} << no);
  for (Index m = 0; m < nm; ++m) {
    const auto& agent = instance.agents[m];
    for (Bundle& b : feasible_bundles(agent.spec, unit_bound)) {
      Candidate c{b, bundle_value(agent, b)};
      ++out.stats.valuation_solves;
      cands[m].push_back(std::move(c));
    }
    const bool empty_ok = !cands[m].empty() &&
                          std::all_of(cands[m][0].bundle.begin(), cands[m][0].bundle.end(), [](int v) { return v == 0; }) &&
                          cands[m][0].value.feasible;
    if (empty_ok)
      baseline[m] = cands[m][0].value.value;
    else
      must_take[m] = true;
  }

  Index nz = 0;
  std::vector<Index> offset(nm);
  for (Index m = 0; m < nm; ++m) {
    offset[m] = nz;
    nz += static_cast<Index>(cands[m].size());
  }
  LpProblem lp = LpProblem::nonnegative(nz, Sense::kMaximize);
  lp.upper.setOnes();
  Index n_must = 0;
  for (Index m = 0; m < nm; ++m) n_must += must_take[m] ? 1 : 0;
  lp.eq_matrix = Eigen::MatrixXd::Zero(n_must, nz);
  lp.eq_rhs = Eigen::VectorXd::Ones(n_must);
  lp.ineq_matrix = Eigen::MatrixXd::Zero(nm - n_must + no, nz);
  lp.ineq_rhs = Eigen::VectorXd::Zero(nm - n_must + no);
  Index eq_row = 0, ineq_row = 0;
  for (Index m = 0; m < nm; ++m) {
    const bool eq = must_take[m];
    const Index row = eq ? eq_row++ : ineq_row++;
    for (std::size_t k = 0; k < cands[m].size(); ++k) {
      const Index j = offset[m] + static_cast<Index>(k);
      const Candidate& c = cands[m][k];
      if (c.value.feasible)
        lp.objective(j) = c.value.value - baseline[m];
      else
        lp.upper(j) = 0.0;
      if (eq)
        lp.eq_matrix(row, j) = 1.0;
      else
        lp.ineq_matrix(row, j) = 1.0;
    }
    if (!eq) lp.ineq_rhs(row) = 1.0;
  }
  const Index supply0 = nm - n_must;
  for (Index o = 0; o < no; ++o) {
    lp.ineq_rhs(supply0 + o) = instance.rho_hat[o];
    for (Index m = 0; m < nm; ++m)
      for (std::size_t k = 0; k < cands[m].size(); ++k)
        lp.ineq_matrix(supply0 + o, offset[m] + static_cast<Index>(k)) = cands[m][k].bundle[o];
  }
  MilpProblem ip;
  ip.base = std::move(lp);
  for (Index j = 0; j < nz; ++j) ip.binary_vars.push_back(j);
  const MilpSolution sol = solve_milp(ip, options.milp);
  if (sol.status != MilpStatus::kOptimal) throw InputError("flat winner determination is infeasible");
  out.stats.milp = sol.stats;
  out.stats.binary_vars = nz;

  for (Index m = 0; m < nm; ++m) {
    const auto& agent = instance.agents[m];
    AgentAllocation a;
    const Candidate* chosen = cands[m].empty() || must_take[m] ? nullptr : &cands[m][0];
    for (std::size_t k = 0; k < cands[m].size(); ++k)
      if (sol.x(offset[m] + static_cast<Index>(k)) > 0.5) chosen = &cands[m][k];
    if (chosen == nullptr) throw InputError("agent " + std::to_string(m) + " has no feasible bundle");
    a.bundle = chosen->bundle;
    a.value = chosen->value.value;
    a.occupation = chosen->value.occupation;
    a.policy = chosen->value.policy;
    a.columns = a.occupation.flat();
    a.usage = policy_resource_usage(a.occupation, agent.spec);
    out.welfare += a.value;
    out.agents.push_back(std::move(a));
  }
  return out;
}

VcgResult vcg_payments(const AuctionInstance& instance, const WdpOptions& options) {
  VcgResult out;
  out.allocation = solve_wdp(instance, options);
  WdpOptions sub = options;
  sub.lexicographic_tiebreak = false;
  const Index nm = instance.num_agents();
  for (Index m = 0; m < nm; ++m) {
    double without = 0.0;
    try {
      without = nm > 1 ? solve_wdp(instance.without_agent(m), sub).welfare : 0.0;
    } catch (const std::exception& e) {
      throw std::runtime_error("VCG sub-solve without agent " + std::to_string(m) + ": " + e.what());
    }
    const double others = out.allocation.welfare - out.allocation.agents[m].value;
    out.welfare_without.push_back(without);
    out.payments.push_back(without - others);
    const Bundle empty(instance.num_resources(), 0);
    out.null_values.push_back(bundle_value(instance.agents[m], empty).value);
  }
  return out;
}

}  // namespace mdpalloc
