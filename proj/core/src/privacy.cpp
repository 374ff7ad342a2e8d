#include "mdpalloc/privacy.hpp"

#include <cmath>
#include <random>

#include "mdpalloc/errors.hpp"

namespace mdpalloc {

namespace {

constexpr double kMaxFCondition = 100.0;
constexpr double kMaxCondition = 1e8;

void require_dual_shape(const LpProblem& lp) {
  lp.validate();
  if (lp.num_ineq() != 0) throw InputError("transform needs an equality-only LP");
  for (Index j = 0; j < lp.num_vars(); ++j)
    if (lp.lower(j) != 0.0 || lp.upper(j) != kInf) throw InputError("transform needs plain nonnegative columns");
}

double condition(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return 1.0;
  const double lo = sv(sv.size() - 1);
  return lo > 0.0 ? sv(0) / lo : kInf;
}

// Random F with F w = 1 (or unconstrained when w is empty) and bounded condition.
Eigen::MatrixXd draw_f(std::mt19937_64& rng, const Eigen::VectorXd& w, Index n) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int attempt = 0; attempt < 200; ++attempt) {
    Eigen::MatrixXd m(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) m(i, j) = unit(rng);
    m += 2.0 * std::sqrt(static_cast<double>(n)) * Eigen::MatrixXd::Identity(n, n);
    if (w.size() == n) m += (Eigen::VectorXd::Ones(n) - m * w) * w.transpose() / w.squaredNorm();
    if (condition(m) <= kMaxFCondition) return m;
  }
  if (w.size() == n) return w.cwiseInverse().asDiagonal();
  return Eigen::MatrixXd::Identity(n, n);
}

}  // namespace

Transform Transform::identity(Index num_columns, Index num_rows) {
  return Transform{Eigen::VectorXd::Ones(num_columns), Eigen::MatrixXd::Identity(num_rows, num_rows)};
}

void Transform::validate() const {
  if (d.size() == 0 || !d.allFinite() || d.minCoeff() <= 0.0) throw InputError("D must be diagonal with positive entries");
  if (f.rows() != f.cols() || !f.allFinite()) throw InputError("F must be square and finite");
  if (std::abs(f.determinant()) <= 1e-12) throw InputError("F is singular");
}

Eigen::VectorXd column_sums(const LpProblem& lp) { return lp.eq_matrix.colwise().sum().transpose(); }

TransformedLp apply_transform(const LpProblem& lp, const Transform& t) {
  require_dual_shape(lp);
  t.validate();
  if (t.d.size() != lp.num_vars() || t.f.rows() != lp.num_eq())
    throw InputError("transform dimensions do not match the LP");
  const Eigen::MatrixXd f_inv_t = t.f.transpose().fullPivLu().inverse();
  TransformedLp out = lp;
  const Eigen::VectorXd d_inv = t.d.cwiseInverse();
  out.objective = lp.objective.cwiseProduct(d_inv);
  out.eq_matrix = f_inv_t * lp.eq_matrix * d_inv.asDiagonal();
  out.eq_rhs = f_inv_t * lp.eq_rhs;
  return out;
}

Eigen::VectorXd invert_solution(const Eigen::VectorXd& y, const Transform& t) {
  if (y.size() != t.d.size()) throw InputError("solution size does not match D");
  return y.cwiseQuotient(t.d);
}

OccupationMeasure invert_solution(const Eigen::VectorXd& y, const Transform& t, Index ns, Index na) {
  return OccupationMeasure::from_vector(invert_solution(y, t).cwiseMax(0.0), ns, na);
}

Transform random_transform(const LpProblem& lp, std::uint64_t seed, std::optional<double> target_discount) {
  require_dual_shape(lp);
  const Index n = lp.num_eq(), nc = lp.num_vars();
  for (Index j = 0; j < nc; ++j)
    if (lp.eq_matrix.col(j).cwiseAbs().maxCoeff() == 0.0)
      throw DegenerateInputError("column " + std::to_string(j) + " of the LP is zero");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Transform t;

  if (!target_discount) {
    t.d.resize(nc);
    for (Index j = 0; j < nc; ++j) t.d(j) = std::pow(10.0, -1.0 + 2.0 * unit(rng));
    t.f = draw_f(rng, Eigen::VectorXd(), n);
    return t;
  }

  const double target = 1.0 - *target_discount;
  if (!(target > 0.0 && target < 1.0)) throw InputError("target discount must lie in (0, 1)");
  const Eigen::VectorXd sums = column_sums(lp);
  const double c0 = sums.mean();
  if (c0 <= 0.0 || (sums.array() - c0).abs().maxCoeff() > 1e-6)
    throw InputError("LP columns must share a positive constant sum");

  // w = F^-1 1 fixes D through d_j = w^T a_j / target. A small perturbation of
  // the all-ones vector keeps every w^T a_j within [c0/2, 3c0/2].
  double l1 = 0.0;
  for (Index j = 0; j < nc; ++j) l1 = std::max(l1, lp.eq_matrix.col(j).lpNorm<1>());
  const double eps = (0.2 + 0.8 * unit(rng)) * 0.5 * c0 / l1;
  Eigen::VectorXd w(n);
  for (Index s = 0; s < n; ++s) w(s) = 1.0 + eps * (2.0 * unit(rng) - 1.0);
  const Eigen::VectorXd raw = (lp.eq_matrix.transpose() * w) / target;
  const double lo = std::log(0.1 / raw.minCoeff()), hi = std::log(10.0 / raw.maxCoeff());
  const double k = std::exp(lo <= hi ? lo + (hi - lo) * unit(rng) : 0.5 * (lo + hi));
  w *= k;
  t.d = raw * k;
  t.f = draw_f(rng, w, n);
  const double cond = condition(t.f) * t.d.maxCoeff() / t.d.minCoeff();
  if (cond > kMaxCondition) throw NumericalError("transform condition estimate exceeds 1e8");
  return t;
}

EncryptedBid encrypt_bid(const ConstrainedMdp& agent, const Transform& t) {
  EncryptedBid b;
  b.lp = apply_transform(build_dual_lp(agent.mdp), t);
  b.num_actions = agent.mdp.num_actions();
  b.rho = agent.spec.rho;
  b.kappa = agent.spec.kappa;
  b.kappa_hat = agent.spec.kappa_hat;
  return b;
}

AgentBid bid_from_encrypted(const EncryptedBid& e) {
  AgentBid b;
  b.flow = e.lp;
  for (Index j = 0; j < e.lp.num_vars(); ++j) b.column_action.push_back(j % e.num_actions);
  b.rho = e.rho;
  b.kappa = e.kappa;
  b.kappa_hat = e.kappa_hat;
  LpProblem mass = e.lp;
  mass.objective.setOnes();
  const LpSolution sol = solve_lp(mass);
  if (sol.status != LpStatus::kOptimal) throw InputError("encrypted bid has no bounded feasible region");
  b.mass_bound = sol.objective * (1.0 + 1e-9) + 1e-12;
  return b;
}

EncryptedAuction encrypt_auction(const AuctionInstance& instance, std::uint64_t seed) {
  instance.validate();
  EncryptedAuction out;
  for (std::size_t m = 0; m < instance.agents.size(); ++m) {
    const ConstrainedMdp& agent = instance.agents[m];
    Transform t = random_transform(build_dual_lp(agent.mdp), seed + m);
    out.bids.push_back(bid_from_encrypted(encrypt_bid(agent, t)));
    out.transforms.push_back(std::move(t));
  }
  return out;
}

void decrypt_allocation(const AuctionInstance& instance, const EncryptedAuction& enc, Allocation& alloc) {
  if (enc.transforms.size() != alloc.agents.size() || instance.agents.size() != alloc.agents.size())
    throw InputError("allocation does not match the encrypted auction");
  for (std::size_t m = 0; m < alloc.agents.size(); ++m) {
    const Mdp& mdp = instance.agents[m].mdp;
    auto& a = alloc.agents[m];
    a.occupation = invert_solution(a.columns, enc.transforms[m], mdp.num_states(), mdp.num_actions());
    a.policy = policy_from_occupation(a.occupation);
  }
}

}  // namespace mdpalloc
