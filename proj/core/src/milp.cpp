#include "mdpalloc/milp.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <queue>
#include <set>

#include "mdpalloc/errors.hpp"

namespace mdpalloc {

namespace {

struct NodeOrder {
  // priority_queue keeps the "largest" on top: best bound, then deepest, then oldest
  template <class T>
  bool operator()(const T& a, const T& b) const {
    if (a.node.parent_bound != b.node.parent_bound) return a.node.parent_bound < b.node.parent_bound;
    if (a.node.depth != b.node.depth) return a.node.depth < b.node.depth;
    return a.id > b.id;
  }
};

bool row_feasible(const LpProblem& p, const RowSparse& eq, const RowSparse& ineq, const Eigen::VectorXd& x) {
  const double tol = 1e-9;
  for (Index j = 0; j < p.num_vars(); ++j)
    if (x(j) < p.lower(j) - tol || x(j) > p.upper(j) + tol) return false;
  if (p.num_eq() > 0) {
    const Eigen::VectorXd r = eq * x - p.eq_rhs;
    for (Index i = 0; i < r.size(); ++i)
      if (std::abs(r(i)) > tol * (1.0 + std::abs(p.eq_rhs(i)))) return false;
  }
  if (p.num_ineq() > 0) {
    const Eigen::VectorXd g = ineq * x;
    for (Index i = 0; i < g.size(); ++i)
      if (g(i) > p.ineq_rhs(i) + tol * (1.0 + std::abs(p.ineq_rhs(i)))) return false;
  }
  return true;
}

}  // namespace

std::string to_string(MilpStatus s) { return s == MilpStatus::kOptimal ? "optimal" : "infeasible"; }

void MilpProblem::validate() const {
  base.validate();
  std::set<Index> seen;
  for (Index b : binary_vars) {
    if (b < 0 || b >= base.num_vars()) throw InputError("binary index out of range");
    if (!seen.insert(b).second) throw InputError("binary index listed twice");
    if (base.lower(b) < 0.0 || base.upper(b) > 1.0)
      throw InputError("binary variable " + std::to_string(b) + " must have bounds within [0, 1]");
  }
}

namespace {

void apply_fixings(const Fixings& fixings, Eigen::VectorXd& lower, Eigen::VectorXd& upper) {
  std::set<Index> seen;
  for (const auto& [idx, val] : fixings) {
    if (idx < 0 || idx >= lower.size()) throw InputError("fixing index out of range");
    if (!seen.insert(idx).second) throw InputError("binary fixed twice in one node");
    lower(idx) = val;
    upper(idx) = val;
  }
}

}  // namespace

LpProblem node_relaxation(const MilpProblem& problem, const BnbNode& node) {
  LpProblem lp = problem.base;
  apply_fixings(node.fixings, lp.lower, lp.upper);
  return lp;
}

std::optional<Index> choose_branch_variable(const MilpProblem& problem, const Eigen::VectorXd& x,
                                            double integrality_tol) {
  std::optional<Index> best;
  double best_dist = kInf;
  for (Index b : problem.binary_vars) {
    const double f = x(b) - std::floor(x(b));
    if (f <= integrality_tol || f >= 1.0 - integrality_tol) continue;
    const double dist = std::abs(f - 0.5);
    if (dist < best_dist - 1e-12 || (std::abs(dist - best_dist) <= 1e-12 && b < *best)) {
      best_dist = dist;
      best = b;
    }
  }
  return best;
}

NodeExpansion expand_node(const MilpProblem& problem, const BnbNode& node, const RelaxationSolver& solve) {
  NodeExpansion out;
  out.relaxation = node_relaxation(problem, node);
  out.solution = solve ? solve(out.relaxation) : solve_lp(out.relaxation);
  if (out.solution.status == LpStatus::kOptimal)
    out.branch_var = choose_branch_variable(problem, out.solution.primal);
  return out;
}

struct BranchAndBound::Open {
  BnbNode node;
  std::int64_t id;
  std::shared_ptr<const WarmBasis> warm;
};

BranchAndBound::BranchAndBound(MilpProblem problem, MilpConfig config)
    : problem_(std::move(problem)), config_(std::move(config)) {
  problem_.validate();
  eq_rows_ = problem_.base.eq_matrix.sparseView();
  ineq_rows_ = problem_.base.ineq_matrix.sparseView();
  if (config_.warm_start && !config_.relaxation) {
    dual_ = std::make_unique<DualSimplex>(problem_.base);
    if (!config_.root_basis.empty()) {
      auto hint = std::make_shared<WarmBasis>();
      hint->basis = config_.root_basis;
      root_ = std::move(hint);
    }
  }
}

LpSolution BranchAndBound::evaluate(const Open& n, std::shared_ptr<const WarmBasis>* warm, bool* was_warm) const {
  *was_warm = false;
  if (config_.relaxation) return config_.relaxation(node_relaxation(problem_, n.node));
  if (dual_ && n.warm) {
    Eigen::VectorXd lo = problem_.base.lower, hi = problem_.base.upper;
    apply_fixings(n.node.fixings, lo, hi);
    WarmBasis next;
    if (auto sol = dual_->resolve(lo, hi, *n.warm, &next)) {
      *was_warm = true;
      if (sol->status == LpStatus::kOptimal) *warm = std::make_shared<const WarmBasis>(std::move(next));
      return *sol;
    }
  }
  LpSolution sol = solve_lp(node_relaxation(problem_, n.node));
  if (dual_ && sol.status == LpStatus::kOptimal) {
    if (auto inv = dual_->invert(sol.basis)) {
      auto wb = std::make_shared<WarmBasis>();
      wb->basis = sol.basis;
      wb->inverse = std::move(inv);
      *warm = std::move(wb);
    }
  }
  return sol;
}

MilpSolution BranchAndBound::solve(const Fixings& fixings, std::optional<double> cutoff) {
  const MilpProblem& problem = problem_;
  const MilpConfig& config = config_;
  const double s = problem.base.sense == Sense::kMaximize ? 1.0 : -1.0;
  const auto start = std::chrono::steady_clock::now();

  std::priority_queue<Open, std::vector<Open>, NodeOrder> open;
  std::int64_t next_id = 0;
  open.push({BnbNode{fixings}, next_id++, root_});

  MilpStats stats;
  std::optional<MilpSolution> incumbent;
  double inc_val = cutoff ? s * *cutoff - config.prune_tol : -kInf;

  auto offer = [&](const Eigen::VectorXd& x) {
    const double v = s * problem.base.objective.dot(x);
    if (v > inc_val) {
      inc_val = v;
      MilpSolution sol;
      sol.status = MilpStatus::kOptimal;
      sol.x = x;
      sol.objective = problem.base.objective.dot(x);
      incumbent = std::move(sol);
    }
  };
  auto with_stats = [&](std::optional<MilpSolution> inc) {
    if (inc) inc->stats = stats;
    return inc;
  };

  const int batch = std::max(1, config.threads);
  while (!open.empty()) {
    if (stats.nodes >= config.node_limit)
      throw BudgetExceeded("branch-and-bound node limit reached", with_stats(incumbent));
    if (config.time_limit && std::chrono::steady_clock::now() - start > *config.time_limit)
      throw BudgetExceeded("branch-and-bound time limit reached", with_stats(incumbent));

    std::vector<Open> work;
    while (!open.empty() && static_cast<int>(work.size()) < batch) {
      Open n = open.top();
      open.pop();
      if (n.node.parent_bound <= inc_val + config.prune_tol) continue;
      work.push_back(std::move(n));
    }
    if (work.empty()) break;

    std::vector<LpSolution> sols(work.size());
    std::vector<std::shared_ptr<const WarmBasis>> warms(work.size());
    std::vector<char> warm_flags(work.size(), 0);
    auto run = [&](std::size_t k) {
      bool was_warm = false;
      sols[k] = evaluate(work[k], &warms[k], &was_warm);
      warm_flags[k] = was_warm;
    };
    if (work.size() == 1) {
      run(0);
    } else {
      std::vector<std::future<void>> futs;
      for (std::size_t k = 0; k < work.size(); ++k) futs.push_back(std::async(std::launch::async, run, k));
      for (auto& f : futs) f.get();
    }

    for (std::size_t k = 0; k < work.size(); ++k) {
      const Open& w = work[k];
      const LpSolution& sol = sols[k];
      ++stats.nodes;
      ++stats.lp_solves;
      if (warm_flags[k]) ++stats.warm_solves;
      if (w.id == 0 && fixings.empty() && warms[k]) root_ = warms[k];
      NodeEvent ev;
      ev.id = w.id;
      ev.parent_bound = w.node.parent_bound;
      if (sol.status == LpStatus::kUnbounded) throw InputError("MILP relaxation is unbounded");
      if (sol.status != LpStatus::kOptimal) {
        if (config.on_node) config.on_node(ev);
        continue;
      }
      const double bound = s * sol.objective;
      ev.bound = bound;
      const auto branch = choose_branch_variable(problem, sol.primal, config.integrality_tol);
      ev.integral = !branch.has_value();
      if (config.on_node) config.on_node(ev);
      if (bound <= inc_val + config.prune_tol) continue;
      if (!branch) {
        Eigen::VectorXd x = sol.primal;
        for (Index b : problem.binary_vars) x(b) = std::round(x(b));
        offer(x);
        continue;
      }
      if (config.rounding_heuristic) {
        for (int mode = 0; mode < 2; ++mode) {
          Eigen::VectorXd x = sol.primal;
          for (Index b : problem.binary_vars) x(b) = mode == 0 ? std::ceil(x(b) - config.integrality_tol) : std::round(x(b));
          if (row_feasible(problem.base, eq_rows_, ineq_rows_, x)) offer(x);
        }
        if (bound <= inc_val + config.prune_tol) continue;
      }
      for (int val : {1, 0}) {
        Open child{w.node, next_id++, warms[k]};
        child.node.fixings.emplace_back(*branch, val);
        child.node.parent_bound = bound;
        child.node.depth = w.node.depth + 1;
        open.push(std::move(child));
      }
    }
  }

  if (!incumbent) {
    MilpSolution out;
    out.status = MilpStatus::kInfeasible;
    out.stats = stats;
    return out;
  }
  incumbent->stats = stats;
  return *incumbent;
}

MilpSolution solve_milp(const MilpProblem& problem, const MilpConfig& config) {
  return BranchAndBound(problem, config).solve();
}

}  // namespace mdpalloc
