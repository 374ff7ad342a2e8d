#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdpalloc/auction.hpp"
#include "mdpalloc/lp.hpp"
#include "mdpalloc/milp.hpp"

namespace mdpalloc {

struct WorkerTask {
  std::string task_id;
  LpProblem relaxation;
};

struct WorkerResponse {
  std::string task_id;
  LpSolution claimed;
};

// A worker answers a task, or stays silent (nullopt).
using WorkerBehavior = std::function<std::optional<WorkerResponse>(const WorkerTask&)>;

namespace workers {
WorkerBehavior honest();
WorkerBehavior inflating(double delta = 10.0);
WorkerBehavior infeasible();         // reports a point with a negative coordinate
WorkerBehavior suboptimal_vertex();  // feasible vertex one pivot away from the optimum
WorkerBehavior sign_flipping();      // negated dual
WorkerBehavior silent();
// "honest", "inflate", "infeasible", "suboptimal-vertex", "sign-flip", "silent".
WorkerBehavior by_name(const std::string& name);
// `count` honest workers with overrides "kind:index[,kind:index...]"
// (0-based indices, e.g. "inflate:1"). An empty spec leaves all honest.
std::vector<WorkerBehavior> from_spec(Index count, const std::string& spec);
}  // namespace workers

enum class Fallback { kResolveLocally, kReassign };

struct DistributedPolicy {
  Fallback fallback = Fallback::kResolveLocally;
  int redundancy = 1;
  std::chrono::milliseconds deadline{10'000};
};

enum class Resolution { kAccepted, kResolvedLocally, kReassigned };
std::string to_string(Resolution r);

struct AuditAttempt {
  Index worker = 0;
  std::string verdict;  // accepted | rejected | timeout | disagreement
  VerifyReason reason = VerifyReason::kNone;
  std::string detail;
  std::int64_t factorizations = 0;
  std::int64_t simplex_runs = 0;
  bool optimality_claim = false;
};

struct AuditRecord {
  std::string task_id;
  std::vector<AuditAttempt> attempts;
  Resolution resolution = Resolution::kResolvedLocally;
};

struct AuditLog {
  std::vector<AuditRecord> records;
  std::vector<Index> flagged;  // in flagging order

  bool is_flagged(Index worker) const;
  std::int64_t count(const std::string& verdict) const;
};

class DeadlockError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DistributedResult {
  MilpSolution solution;
  AuditLog audit;
};

// Branch and bound whose relaxations are farmed out round-robin to the
// unflagged workers and accepted only after duality verification.
DistributedResult run_distributed(const MilpProblem& problem, const std::vector<WorkerBehavior>& workers,
                                  const DistributedPolicy& policy = {}, MilpConfig config = {});

struct DistributedWdp {
  Allocation allocation;
  AuditLog audit;
};

// Winner determination over the given bids with verified remote relaxations.
DistributedWdp run_distributed_wdp(const std::vector<AgentBid>& bids, const Bundle& rho_hat,
                                   const std::vector<WorkerBehavior>& workers, const DistributedPolicy& policy = {},
                                   MilpConfig config = {});

}  // namespace mdpalloc
