#include "mdpalloc/json_io.hpp"

#include <cmath>
#include <fstream>
#include <optional>

#include "mdpalloc/errors.hpp"

namespace mdpalloc {

namespace {

Json vec(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Json mat(const Eigen::MatrixXd& m) {
  Json a = Json::array();
  for (Index i = 0; i < m.rows(); ++i) a.push_back(vec(m.row(i).transpose()));
  return a;
}

Json bounded(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) {
    if (std::isinf(v(i)))
      a.push_back(nullptr);
    else
      a.push_back(v(i));
  }
  return a;
}

Eigen::VectorXd read_vec(const Json& j) {
  if (!j.is_array()) throw ParseError("expected an array of numbers");
  Eigen::VectorXd v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = j[i].get<double>();
  return v;
}

Eigen::VectorXd read_bounded(const Json& j, double inf) {
  if (!j.is_array()) throw ParseError("expected an array of bounds");
  Eigen::VectorXd v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = j[i].is_null() ? inf : j[i].get<double>();
  return v;
}

Eigen::MatrixXd read_mat(const Json& j, Index cols) {
  if (!j.is_array()) throw ParseError("expected a matrix");
  Eigen::MatrixXd m(static_cast<Index>(j.size()), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Eigen::VectorXd row = read_vec(j[i]);
    if (row.size() != cols) throw ParseError("ragged matrix row");
    m.row(static_cast<Index>(i)) = row.transpose();
  }
  return m;
}

// Column count taken from the first row; an empty matrix keeps `fallback` columns.
Eigen::MatrixXd read_mat(const Json& j, std::optional<Index> fallback = std::nullopt) {
  if (!j.is_array()) throw ParseError("expected a matrix");
  const Index cols = j.empty() ? fallback.value_or(0) : static_cast<Index>(j[0].size());
  return read_mat(j, cols);
}

std::vector<std::string> read_names(const Json& j, const char* key) {
  if (!j.contains(key)) return {};
  return j.at(key).get<std::vector<std::string>>();
}

template <class F>
auto guarded(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ParseError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(e.what());
  } catch (const InputError& e) {
    throw ParseError(e.what());
  }
}

void check_version(const Json& j) {
  if (j.at("version").get<int>() != kWireVersion) throw ParseError("unsupported wire version");
}

void lp_fields(Json& out, const LpProblem& lp) {
  out["sense"] = lp.sense == Sense::kMaximize ? "max" : "min";
  out["c"] = vec(lp.objective);
  out["A"] = mat(lp.eq_matrix);
  out["b"] = vec(lp.eq_rhs);
  out["G"] = mat(lp.ineq_matrix);
  out["h"] = vec(lp.ineq_rhs);
  out["lower"] = bounded(lp.lower);
  out["upper"] = bounded(lp.upper);
}

LpProblem lp_from_fields(const Json& j) {
  LpProblem lp;
  const std::string sense = j.at("sense").get<std::string>();
  if (sense != "max" && sense != "min") throw ParseError("sense must be 'max' or 'min'");
  lp.sense = sense == "max" ? Sense::kMaximize : Sense::kMinimize;
  lp.objective = read_vec(j.at("c"));
  const Index n = lp.objective.size();
  lp.eq_matrix = read_mat(j.at("A"), n);
  lp.eq_rhs = read_vec(j.at("b"));
  lp.ineq_matrix = read_mat(j.at("G"), n);
  lp.ineq_rhs = read_vec(j.at("h"));
  lp.lower = read_bounded(j.at("lower"), -kInf);
  lp.upper = read_bounded(j.at("upper"), kInf);
  lp.validate();
  return lp;
}

LpStatus status_from_string(const std::string& s) {
  if (s == to_string(LpStatus::kOptimal)) return LpStatus::kOptimal;
  if (s == to_string(LpStatus::kInfeasible)) return LpStatus::kInfeasible;
  if (s == to_string(LpStatus::kUnbounded)) return LpStatus::kUnbounded;
  throw ParseError("unknown LP status '" + s + "'");
}

Json bundle_json(const Bundle& b) { return Json(b); }

}  // namespace

Json to_json(const Mdp& mdp) {
  Json j;
  j["num_states"] = mdp.num_states();
  j["num_actions"] = mdp.num_actions();
  j["discount"] = mdp.discount();
  j["initial"] = vec(mdp.initial());
  j["reward"] = mat(mdp.reward());
  Json t = Json::array();
  for (Index s = 0; s < mdp.num_states(); ++s) {
    Json per_action = Json::array();
    for (Index a = 0; a < mdp.num_actions(); ++a) per_action.push_back(vec(mdp.transition(a).row(s).transpose()));
    t.push_back(std::move(per_action));
  }
  j["transition"] = std::move(t);
  return j;
}

Mdp mdp_from_json(const Json& j) {
  return guarded([&] {
    const Index ns = j.at("num_states").get<Index>(), na = j.at("num_actions").get<Index>();
    if (ns <= 0 || na <= 0) throw ParseError("num_states and num_actions must be positive");
    const Eigen::MatrixXd reward = read_mat(j.at("reward"), na);
    if (reward.rows() != ns) throw ParseError("reward must have num_states rows");
    const Json& t = j.at("transition");
    if (!t.is_array() || static_cast<Index>(t.size()) != ns) throw ParseError("transition must have num_states entries");
    std::vector<Eigen::MatrixXd> p(na, Eigen::MatrixXd(ns, ns));
    for (Index s = 0; s < ns; ++s) {
      const Eigen::MatrixXd rows = read_mat(t[s], ns);
      if (rows.rows() != na) throw ParseError("transition[s] must have num_actions rows");
      for (Index a = 0; a < na; ++a) p[a].row(s) = rows.row(a);
    }
    return Mdp(std::move(p), reward, j.at("discount").get<double>(), read_vec(j.at("initial")));
  });
}

Json to_json(const ConstrainedMdp& cmdp) {
  Json j = to_json(cmdp.mdp);
  const ResourceSpec& s = cmdp.spec;
  j["resources"] = s.resources;
  j["capacities"] = s.capacities;
  j["rho"] = mat(s.rho);
  j["kappa"] = mat(s.kappa);
  j["kappa_hat"] = vec(s.kappa_hat);
  return j;
}

ConstrainedMdp cmdp_from_json(const Json& j) {
  return guarded([&] {
    Mdp mdp = mdp_from_json(j);
    ResourceSpec spec;
    spec.resources = read_names(j, "resources");
    spec.capacities = read_names(j, "capacities");
    spec.kappa_hat = read_vec(j.at("kappa_hat"));
    const Json& rho = j.at("rho");
    const Index no = rho.empty() ? static_cast<Index>(spec.resources.size()) : static_cast<Index>(rho[0].size());
    spec.rho = read_mat(rho, no);
    spec.kappa = read_mat(j.at("kappa"), spec.kappa_hat.size());
    if (spec.kappa.rows() == 0) spec.kappa.resize(no, spec.kappa_hat.size());
    return ConstrainedMdp(std::move(mdp), std::move(spec));
  });
}

Json to_json(const AuctionInstance& inst) {
  Json j;
  j["discount"] = inst.discount;
  j["resources"] = inst.resources;
  j["capacities"] = inst.capacities;
  j["kappa"] = mat(inst.kappa);
  j["rho_hat"] = inst.rho_hat;
  Json agents = Json::array();
  for (const auto& a : inst.agents) agents.push_back(to_json(a));
  j["agents"] = std::move(agents);
  return j;
}

AuctionInstance auction_from_json(const Json& j) {
  return guarded([&] {
    AuctionInstance inst;
    inst.discount = j.at("discount").get<double>();
    inst.resources = read_names(j, "resources");
    inst.capacities = read_names(j, "capacities");
    inst.rho_hat = j.at("rho_hat").get<Bundle>();
    const Json& agents = j.at("agents");
    if (!agents.is_array() || agents.empty()) throw ParseError("auction needs a non-empty agents array");
    for (const auto& a : agents) inst.agents.push_back(cmdp_from_json(a));
    inst.kappa = read_mat(j.at("kappa"), inst.agents[0].spec.num_capacities());
    if (inst.kappa.rows() == 0) inst.kappa.resize(static_cast<Index>(inst.rho_hat.size()), inst.agents[0].spec.num_capacities());
    for (const auto& a : inst.agents)
      if (std::abs(a.mdp.discount() - inst.discount) > 1e-12) throw ParseError("agent discount differs from the auction discount");
    inst.validate();
    return inst;
  });
}

Json to_json(const WorkerTask& task) {
  Json j;
  j["version"] = kWireVersion;
  j["id"] = task.task_id;
  lp_fields(j, task.relaxation);
  return j;
}

WorkerTask task_from_json(const Json& j) {
  return guarded([&] {
    check_version(j);
    return WorkerTask{j.at("id").get<std::string>(), lp_from_fields(j)};
  });
}

Json to_json(const WorkerResponse& resp) {
  Json j;
  j["version"] = kWireVersion;
  j["id"] = resp.task_id;
  j["status"] = to_string(resp.claimed.status);
  j["x"] = vec(resp.claimed.primal);
  j["y"] = vec(resp.claimed.dual);
  j["objective"] = resp.claimed.objective;
  j["basis"] = resp.claimed.basis;
  return j;
}

WorkerResponse response_from_json(const Json& j) {
  return guarded([&] {
    check_version(j);
    WorkerResponse r;
    r.task_id = j.at("id").get<std::string>();
    r.claimed.status = status_from_string(j.at("status").get<std::string>());
    r.claimed.primal = read_vec(j.at("x"));
    r.claimed.dual = read_vec(j.at("y"));
    r.claimed.objective = j.at("objective").get<double>();
    r.claimed.basis = j.at("basis").get<std::vector<Index>>();
    return r;
  });
}

Json to_json(const EncryptedBid& bid) {
  Json j;
  j["version"] = kWireVersion;
  j["num_actions"] = bid.num_actions;
  Json lp;
  lp_fields(lp, bid.lp);
  j["lp"] = std::move(lp);
  j["rho"] = mat(bid.rho);
  j["kappa"] = mat(bid.kappa);
  j["kappa_hat"] = vec(bid.kappa_hat);
  return j;
}

EncryptedBid encrypted_bid_from_json(const Json& j) {
  return guarded([&] {
    check_version(j);
    EncryptedBid b;
    b.num_actions = j.at("num_actions").get<Index>();
    b.lp = lp_from_fields(j.at("lp"));
    b.rho = read_mat(j.at("rho"));
    b.kappa_hat = read_vec(j.at("kappa_hat"));
    b.kappa = read_mat(j.at("kappa"), b.kappa_hat.size());
    if (b.num_actions <= 0 || b.lp.num_vars() % b.num_actions != 0 || b.rho.rows() != b.num_actions)
      throw ParseError("encrypted bid dimensions are inconsistent");
    return b;
  });
}

Json to_json(const Policy& policy) {
  Json j;
  j["actions"] = policy.actions();
  j["deterministic"] = policy.is_deterministic(1e-9);
  j["probabilities"] = mat(policy.probs);
  return j;
}

Json to_json(const AuditLog& log) {
  Json j;
  j["flagged_workers"] = log.flagged;
  Json recs = Json::array();
  for (const auto& r : log.records) {
    Json rec;
    rec["task"] = r.task_id;
    rec["resolution"] = to_string(r.resolution);
    Json atts = Json::array();
    for (const auto& a : r.attempts) {
      Json att;
      att["worker"] = a.worker;
      att["verdict"] = a.verdict;
      att["reason"] = to_string(a.reason);
      att["detail"] = a.detail;
      att["factorizations"] = a.factorizations;
      att["simplex_runs"] = a.simplex_runs;
      atts.push_back(std::move(att));
    }
    rec["attempts"] = std::move(atts);
    recs.push_back(std::move(rec));
  }
  j["records"] = std::move(recs);
  return j;
}

Json constrained_report(const ConstrainedSolution& sol) {
  Json j;
  j["status"] = to_string(sol.status);
  j["objective"] = sol.value;
  j["bundle"] = bundle_json(sol.usage);
  j["indicators"] = sol.indicators;
  if (sol.policy.probs.size() > 0) j["policy"] = to_json(sol.policy);
  j["stats"] = {{"nodes", sol.stats.nodes}, {"lp_solves", sol.stats.lp_solves}};
  return j;
}

Json allocation_report(const Allocation& alloc, const std::vector<double>* payments) {
  Json j;
  j["welfare"] = alloc.welfare;
  Json agents = Json::array();
  for (std::size_t m = 0; m < alloc.agents.size(); ++m) {
    const auto& a = alloc.agents[m];
    Json aj;
    aj["agent"] = m;
    aj["bundle"] = bundle_json(a.bundle);
    aj["usage"] = bundle_json(a.usage);
    aj["value"] = a.value;
    if (payments) aj["payment"] = (*payments)[m];
    if (a.policy.probs.size() > 0) aj["policy"] = to_json(a.policy);
    agents.push_back(std::move(aj));
  }
  j["agents"] = std::move(agents);
  j["stats"] = {{"nodes", alloc.stats.milp.nodes},
                {"lp_solves", alloc.stats.milp.lp_solves},
                {"binary_vars", alloc.stats.binary_vars},
                {"enumerated_bundles", alloc.stats.enumerated_bundles},
                {"valuation_solves", alloc.stats.valuation_solves}};
  return j;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("'" + path + "': " + e.what());
  }
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

}  // namespace mdpalloc
