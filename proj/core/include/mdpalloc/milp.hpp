#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mdpalloc/lp.hpp"

namespace mdpalloc {

struct MilpProblem {
  LpProblem base;
  std::vector<Index> binary_vars;

  // Throws InputError unless every binary index is in range, unique and bounded by [0, 1].
  void validate() const;
};

using RowSparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Fixings = std::vector<std::pair<Index, int>>;  // (binary index, 0 or 1)

struct BnbNode {
  Fixings fixings;
  double parent_bound = kInf;
  int depth = 0;
};

enum class MilpStatus { kOptimal, kInfeasible };
std::string to_string(MilpStatus s);

struct MilpStats {
  std::int64_t nodes = 0;
  std::int64_t lp_solves = 0;
  std::int64_t warm_solves = 0;  // relaxations re-solved from a parent basis
};

struct MilpSolution {
  MilpStatus status = MilpStatus::kInfeasible;
  Eigen::VectorXd x;
  double objective = 0.0;
  MilpStats stats;
};

using RelaxationSolver = std::function<LpSolution(const LpProblem&)>;

// Bounds are reported in maximization form (negated for minimization problems).
struct NodeEvent {
  std::int64_t id = 0;
  double parent_bound = kInf;
  std::optional<double> bound;  // empty when the relaxation is infeasible
  bool integral = false;
};

struct MilpConfig {
  std::int64_t node_limit = 1'000'000;
  double integrality_tol = 1e-6;
  double prune_tol = 1e-9;
  // Nodes evaluated per batch; values > 1 evaluate relaxations concurrently.
  int threads = 1;
  // Round fractional binaries and test the point against every row.
  bool rounding_heuristic = true;
  std::optional<std::chrono::milliseconds> time_limit;
  // Re-solve children from the parent's basis with the dual simplex. Only
  // applies when no custom relaxation is set.
  bool warm_start = true;
  // Dual-feasible augmented basis to start the root relaxation from.
  std::vector<Index> root_basis;
  RelaxationSolver relaxation;  // defaults to solve_lp
  std::function<void(const NodeEvent&)> on_node;
};

// Carries the best solution found before the node or time budget ran out.
class BudgetExceeded : public std::runtime_error {
 public:
  BudgetExceeded(const std::string& what, std::optional<MilpSolution> incumbent)
      : std::runtime_error(what), incumbent_(std::move(incumbent)) {}
  const std::optional<MilpSolution>& incumbent() const { return incumbent_; }

 private:
  std::optional<MilpSolution> incumbent_;
};

struct NodeExpansion {
  LpProblem relaxation;
  LpSolution solution;
  std::optional<Index> branch_var;
};

// The node's relaxation with fixings applied as equal lower/upper bounds.
LpProblem node_relaxation(const MilpProblem& problem, const BnbNode& node);
// Most fractional binary (distance to 0.5, lowest index on ties), if any.
std::optional<Index> choose_branch_variable(const MilpProblem& problem, const Eigen::VectorXd& x,
                                            double integrality_tol = 1e-6);
NodeExpansion expand_node(const MilpProblem& problem, const BnbNode& node,
                          const RelaxationSolver& solve = {});

// Best-bound branch and bound. Minimization problems are handled by negation.
// Keeps the root basis between calls so that repeated solves under extra
// fixings start warm.
class BranchAndBound {
 public:
  explicit BranchAndBound(MilpProblem problem, MilpConfig config = {});

  // Solutions must reach `cutoff` (in the problem's sense); otherwise kInfeasible.
  MilpSolution solve(const Fixings& fixings = {}, std::optional<double> cutoff = std::nullopt);

  const MilpProblem& problem() const { return problem_; }

 private:
  struct Open;
  LpSolution evaluate(const Open& node, std::shared_ptr<const WarmBasis>* warm, bool* was_warm) const;

  MilpProblem problem_;
  MilpConfig config_;
  std::unique_ptr<DualSimplex> dual_;
  std::shared_ptr<const WarmBasis> root_;
  RowSparse eq_rows_, ineq_rows_;
};

MilpSolution solve_milp(const MilpProblem& problem, const MilpConfig& config = {});

}  // namespace mdpalloc
