#include "mdpalloc/distributed.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <mutex>

#include "mdpalloc/errors.hpp"

namespace mdpalloc {

namespace workers {

WorkerBehavior honest() {
  return [](const WorkerTask& t) -> std::optional<WorkerResponse> {
    return WorkerResponse{t.task_id, solve_lp(t.relaxation)};
  };
}

WorkerBehavior inflating(double delta) {
  return [delta](const WorkerTask& t) -> std::optional<WorkerResponse> {
    WorkerResponse r{t.task_id, solve_lp(t.relaxation)};
    if (r.claimed.status == LpStatus::kOptimal) r.claimed.objective += delta;
    return r;
  };
}

WorkerBehavior infeasible() {
  return [](const WorkerTask& t) -> std::optional<WorkerResponse> {
    WorkerResponse r{t.task_id, solve_lp(t.relaxation)};
    if (r.claimed.status != LpStatus::kOptimal) return r;
    const LpProblem& p = t.relaxation;
    for (Index j = 0; j < p.num_vars(); ++j) {
      if (std::isfinite(p.lower(j))) {
        r.claimed.primal(j) = p.lower(j) - 1e-3;
        break;
      }
    }
    return r;
  };
}

WorkerBehavior suboptimal_vertex() {
  return [](const WorkerTask& t) -> std::optional<WorkerResponse> {
    WorkerResponse r{t.task_id, solve_lp(t.relaxation)};
    if (auto adj = adjacent_vertex(t.relaxation, r.claimed)) r.claimed = *adj;
    return r;
  };
}

WorkerBehavior sign_flipping() {
  return [](const WorkerTask& t) -> std::optional<WorkerResponse> {
    WorkerResponse r{t.task_id, solve_lp(t.relaxation)};
    r.claimed.dual = -r.claimed.dual;
    return r;
  };
}

WorkerBehavior silent() {
  return [](const WorkerTask&) -> std::optional<WorkerResponse> { return std::nullopt; };
}

WorkerBehavior by_name(const std::string& name) {
  if (name == "honest") return honest();
  if (name == "inflate") return inflating();
  if (name == "infeasible") return infeasible();
  if (name == "suboptimal-vertex") return suboptimal_vertex();
  if (name == "sign-flip") return sign_flipping();
  if (name == "silent") return silent();
  throw InputError("unknown worker behaviour '" + name + "'");
}

std::vector<WorkerBehavior> from_spec(Index count, const std::string& spec) {
  if (count < 1) throw InputError("need at least one worker");
  std::vector<WorkerBehavior> out(count, honest());
  std::size_t start = 0;
  while (start < spec.size()) {
    std::size_t end = spec.find(',', start);
    if (end == std::string::npos) end = spec.size();
    const std::string item = spec.substr(start, end - start);
    start = end + 1;
    if (item.empty()) continue;
    const std::size_t colon = item.rfind(':');
    if (colon == std::string::npos) throw InputError("adversary entry '" + item + "' lacks ':index'");
    Index idx = 0;
    try {
      std::size_t used = 0;
      idx = std::stoll(item.substr(colon + 1), &used);
      if (used != item.size() - colon - 1) throw InputError("");
    } catch (const std::exception&) {
      throw InputError("adversary entry '" + item + "' has a bad index");
    }
    if (idx < 0 || idx >= count) throw InputError("adversary index " + std::to_string(idx) + " out of range");
    out[idx] = by_name(item.substr(0, colon));
  }
  return out;
}

}  // namespace workers

std::string to_string(Resolution r) {
  switch (r) {
    case Resolution::kAccepted: return "accepted";
    case Resolution::kResolvedLocally: return "re-solved locally";
    case Resolution::kReassigned: return "reassigned";
  }
  return "unknown";
}

bool AuditLog::is_flagged(Index worker) const {
  return std::find(flagged.begin(), flagged.end(), worker) != flagged.end();
}

std::int64_t AuditLog::count(const std::string& verdict) const {
  std::int64_t n = 0;
  for (const auto& rec : records)
    for (const auto& a : rec.attempts)
      if (a.verdict == verdict) ++n;
  return n;
}

namespace {

class Auctioneer {
 public:
  Auctioneer(const std::vector<WorkerBehavior>& workers, const DistributedPolicy& policy)
      : workers_(workers), policy_(policy) {}

  ~Auctioneer() {
    for (auto& f : stragglers_) f.wait();
  }

  LpSolution evaluate(const LpProblem& lp) {
    std::lock_guard<std::mutex> lock(mu_);
    char id[32];
    std::snprintf(id, sizeof id, "task-%06lld", static_cast<long long>(next_task_++));
    const WorkerTask task{id, lp};
    AuditRecord rec;
    rec.task_id = task.task_id;

    const int k = std::max(1, policy_.redundancy);
    std::vector<Index> chosen = pick(k);
    if (chosen.empty()) {
      if (policy_.fallback == Fallback::kReassign) throw DeadlockError("no unflagged worker left for " + task.task_id);
      return resolve_locally(std::move(rec), lp);
    }
    std::vector<std::pair<Index, LpSolution>> accepted = dispatch(task, chosen, rec);
    const bool all_ok = accepted.size() == chosen.size();
    if (all_ok && agree(accepted)) {
      rec.resolution = Resolution::kAccepted;
      log_.records.push_back(std::move(rec));
      return accepted.front().second;
    }
    if (all_ok) {
      for (auto& a : rec.attempts) a.verdict = "disagreement";
      for (Index w : chosen) flag(w);
    }
    if (k > 1 || policy_.fallback == Fallback::kResolveLocally) return resolve_locally(std::move(rec), lp);

    while (true) {
      std::vector<Index> next = pick(1);
      if (next.empty()) throw DeadlockError("every worker rejected " + task.task_id);
      auto ok = dispatch(task, next, rec);
      if (!ok.empty()) {
        rec.resolution = Resolution::kReassigned;
        log_.records.push_back(std::move(rec));
        return ok.front().second;
      }
    }
  }

  AuditLog take_log() { return std::move(log_); }

 private:
  std::vector<Index> pick(int k) {
    std::vector<Index> out;
    const Index n = static_cast<Index>(workers_.size());
    for (Index tried = 0; tried < n && static_cast<int>(out.size()) < k; ++tried) {
      const Index w = (cursor_ + tried) % n;
      if (!log_.is_flagged(w)) out.push_back(w);
    }
    if (!out.empty()) cursor_ = (out.back() + 1) % n;
    return out;
  }

  void flag(Index w) {
    if (!log_.is_flagged(w)) log_.flagged.push_back(w);
  }

  std::vector<std::pair<Index, LpSolution>> dispatch(const WorkerTask& task, const std::vector<Index>& chosen,
                                                     AuditRecord& rec) {
    std::vector<std::future<std::optional<WorkerResponse>>> futs;
    for (Index w : chosen) futs.push_back(std::async(std::launch::async, workers_[w], task));
    const auto until = std::chrono::steady_clock::now() + policy_.deadline;
    std::vector<std::pair<Index, LpSolution>> accepted;
    for (std::size_t i = 0; i < chosen.size(); ++i) {
      AuditAttempt att;
      att.worker = chosen[i];
      std::optional<WorkerResponse> resp;
      if (futs[i].wait_until(until) == std::future_status::ready) {
        try {
          resp = futs[i].get();
        } catch (const std::exception& e) {
          att.detail = e.what();
        }
      } else {
        stragglers_.push_back(std::move(futs[i]));
      }
      if (!resp) {
        att.verdict = "timeout";
        flag(att.worker);
      } else if (resp->task_id != task.task_id) {
        att.verdict = "rejected";
        att.reason = VerifyReason::kMalformed;
        att.detail = "response id does not match the task";
        flag(att.worker);
      } else {
        const Verdict v = verify_solution(task.relaxation, resp->claimed);
        att.reason = v.reason;
        att.detail = v.detail;
        att.factorizations = v.factorizations;
        att.simplex_runs = v.simplex_runs;
        att.optimality_claim = resp->claimed.status == LpStatus::kOptimal;
        if (v.accepted) {
          att.verdict = "accepted";
          accepted.emplace_back(att.worker, std::move(resp->claimed));
        } else {
          att.verdict = "rejected";
          flag(att.worker);
        }
      }
      rec.attempts.push_back(std::move(att));
    }
    return accepted;
  }

  static bool agree(const std::vector<std::pair<Index, LpSolution>>& sols) {
    const LpSolution& first = sols.front().second;
    for (const auto& [w, s] : sols) {
      if (s.status != first.status) return false;
      if (s.status == LpStatus::kOptimal &&
          std::abs(s.objective - first.objective) > 1e-6 * (1.0 + std::abs(first.objective)))
        return false;
    }
    return true;
  }

  LpSolution resolve_locally(AuditRecord rec, const LpProblem& lp) {
    rec.resolution = Resolution::kResolvedLocally;
    log_.records.push_back(std::move(rec));
    return solve_lp(lp);
  }

  const std::vector<WorkerBehavior>& workers_;
  DistributedPolicy policy_;
  std::mutex mu_;
  AuditLog log_;
  Index cursor_ = 0;
  std::int64_t next_task_ = 0;
  std::vector<std::future<std::optional<WorkerResponse>>> stragglers_;
};

}  // namespace

DistributedResult run_distributed(const MilpProblem& problem, const std::vector<WorkerBehavior>& workers,
                                  const DistributedPolicy& policy, MilpConfig config) {
  if (workers.empty()) throw InputError("run_distributed needs at least one worker");
  if (policy.redundancy < 1) throw InputError("redundancy must be at least 1");
  Auctioneer auctioneer(workers, policy);
  config.relaxation = [&auctioneer](const LpProblem& lp) { return auctioneer.evaluate(lp); };
  DistributedResult out;
  out.solution = solve_milp(problem, config);
  out.audit = auctioneer.take_log();
  return out;
}

}  // namespace mdpalloc

namespace mdpalloc {

DistributedWdp run_distributed_wdp(const std::vector<AgentBid>& bids, const Bundle& rho_hat,
                                   const std::vector<WorkerBehavior>& workers, const DistributedPolicy& policy,
                                   MilpConfig config) {
  const WdpMilp w = build_wdp_milp(bids, rho_hat);
  DistributedResult r = run_distributed(w.milp, workers, policy, std::move(config));
  return DistributedWdp{decode_allocation(bids, w.layout, r.solution), std::move(r.audit)};
}

}  // namespace mdpalloc
