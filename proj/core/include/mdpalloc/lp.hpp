#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace mdpalloc {

using Index = Eigen::Index;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Sense { kMinimize, kMaximize };

// optimize c^T x  s.t.  A x = b,  G x <= h,  lower <= x <= upper.
// A nonnegativity mask is expressed as lower(j) = 0.
struct LpProblem {
  Sense sense = Sense::kMinimize;
  Eigen::VectorXd objective;
  Eigen::MatrixXd eq_matrix;
  Eigen::VectorXd eq_rhs;
  Eigen::MatrixXd ineq_matrix;
  Eigen::VectorXd ineq_rhs;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  // Empty problem over n nonnegative variables.
  static LpProblem nonnegative(Index n, Sense sense);

  Index num_vars() const { return objective.size(); }
  Index num_eq() const { return eq_matrix.rows(); }
  Index num_ineq() const { return ineq_matrix.rows(); }
  Index num_rows() const { return num_eq() + num_ineq(); }
  bool nonneg(Index j) const { return lower(j) >= 0.0; }

  // Throws InputError on inconsistent dimensions, non-finite data or lower > upper.
  void validate() const;
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded };
std::string to_string(LpStatus s);

// Variables are indexed over the augmented vector [x | one logical per row]:
// logical n+i is the slack of row i (fixed at 0 for equality rows, >= 0 for
// inequality rows, equality rows first). `basis` lists num_rows() such indices.
// `dual` holds one multiplier per row (equality rows first); for a
// maximization with <= rows they are nonnegative. For kInfeasible, `dual` is a
// Farkas ray: y^T rhs exceeds the box maximum of (M^T y)^T z.
struct LpSolution {
  LpStatus status = LpStatus::kInfeasible;
  Eigen::VectorXd primal;
  Eigen::VectorXd dual;
  double objective = 0.0;
  std::vector<Index> basis;
};

struct SimplexOptions {
  int bland_after_stalls = 50;
  double pivot_tol = 1e-9;
  double optimality_tol = 1e-9;
  double feasibility_tol = 1e-9;
  double infeasible_threshold = 1e-7;
  std::int64_t max_iterations = 0;  // 0 picks a size-based default
};

// Dense bounded-variable two-phase simplex. Holds scratch memory, so one solve
// per instance at a time.
class SimplexSolver {
 public:
  explicit SimplexSolver(SimplexOptions options = {});
  LpSolution solve(const LpProblem& problem);
  std::int64_t last_iterations() const { return last_iterations_; }

 private:
  SimplexOptions options_;
  std::int64_t last_iterations_ = 0;
  std::vector<double> tableau_;
};

LpSolution solve_lp(const LpProblem& problem, const SimplexOptions& options = {});

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// One basis change: position `row` now holds a column whose representation in
// the previous basis was `column`.
struct EtaUpdate {
  Index row = 0;
  Eigen::VectorXd column;
};

// Product-form factorization of a basis plus the vertex it was optimal at.
// Nodes of a search tree share the inverse and the update chain of their parent.
struct WarmBasis {
  std::vector<Index> basis;                  // augmented indices
  std::shared_ptr<const RowMatrix> inverse;  // of the basis before `updates`; null = refactor
  std::vector<std::shared_ptr<const EtaUpdate>> updates;
  Eigen::VectorXd values;   // augmented point; empty = recompute
  Eigen::VectorXd reduced;  // reduced costs of the minimization form; empty = recompute
};

// Bounded dual simplex for re-solving one constraint system under changed
// variable bounds. Stateless after construction; concurrent resolve() calls are safe.
class DualSimplex {
 public:
  explicit DualSimplex(const LpProblem& problem);

  // Starts from a basis that is dual feasible for the problem's objective.
  // nullopt when the start is unusable or numerics degrade; the caller then
  // solves cold. Infeasible results carry no Farkas ray. `lower` and `upper`
  // bound the structural variables only.
  std::optional<LpSolution> resolve(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                    const WarmBasis& start, WarmBasis* optimal_out = nullptr) const;

  // Inverse of an augmented basis, or null when it is singular.
  std::shared_ptr<const RowMatrix> invert(const std::vector<Index>& basis) const;

  Index num_augmented() const { return n_ + m_; }

 private:
  Index n_ = 0, m_ = 0;
  Sense sense_ = Sense::kMinimize;
  Eigen::SparseMatrix<double> a_;  // m x (n + m)
  Eigen::SparseMatrix<double, Eigen::RowMajor> a_rows_;
  Eigen::VectorXd b_, cost_, logical_lo_, logical_hi_;
};

// [eq; ineq] stacked beside the identity block of logicals.
Eigen::MatrixXd augmented_matrix(const LpProblem& problem);
Eigen::VectorXd augmented_rhs(const LpProblem& problem);
Eigen::VectorXd augmented_lower(const LpProblem& problem);
Eigen::VectorXd augmented_upper(const LpProblem& problem);
Eigen::VectorXd augmented_cost(const LpProblem& problem);

enum class VerifyReason {
  kNone,
  kMalformed,
  kPrimalInfeasible,
  kDualInfeasible,
  kComplementarySlackness,
  kGap,
};
std::string to_string(VerifyReason r);

struct Verdict {
  bool accepted = false;
  VerifyReason reason = VerifyReason::kMalformed;
  std::string detail;
  // Work performed by this verification, measured on the calling thread.
  std::int64_t factorizations = 0;
  std::int64_t simplex_runs = 0;
};

struct VerifyOptions {
  double tol = 1e-6;
};

// Duality check of a claimed solution using one factorization of the claimed
// basis. Infeasibility claims are checked through their Farkas ray.
Verdict verify_solution(const LpProblem& problem, const LpSolution& claimed,
                        const VerifyOptions& options = {});

// Feasible vertex adjacent to an optimal one, reached by a single pivot on the
// lowest-index nonbasic column with a nonzero reduced cost. Dual and basis are
// copied from `optimal`. Returns nullopt when no such bounded step exists.
std::optional<LpSolution> adjacent_vertex(const LpProblem& problem, const LpSolution& optimal);

// Per-thread operation counters.
struct LpCounters {
  std::int64_t factorizations = 0;
  std::int64_t simplex_runs = 0;
};
LpCounters lp_counters();

}  // namespace mdpalloc
