#include "mdpalloc/benchgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "mdpalloc/errors.hpp"

namespace mdpalloc {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw InputError(msg);
}

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo = 0.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Index uniform_index(Rng& rng, Index n) {
  return std::uniform_int_distribution<Index>(0, n - 1)(rng);
}

std::vector<std::string> numbered(const std::string& prefix, Index n) {
  std::vector<std::string> out;
  for (Index i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i + 1));
  return out;
}

std::vector<Eigen::MatrixXd> zero_transitions(Index na, Index ns) {
  return std::vector<Eigen::MatrixXd>(na, Eigen::MatrixXd::Zero(ns, ns));
}

Eigen::VectorXd point_mass(Index ns, Index s) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(ns);
  v(s) = 1.0;
  return v;
}

}  // namespace

// ---------------------------------------------------------------- delivery

void DeliveryParams::validate() const {
  require(grid_n >= 1 && num_agents >= 1 && num_resources >= 1 && resources_per_action >= 1,
          "delivery parameters must be positive");
  require(c_glob >= 0.0 && c_glob <= 1.0 && c_loc >= 0.0 && c_loc <= 1.0, "constraint levels must lie in [0, 1]");
  require(grid_n * grid_n >= 5, "grid needs at least one delivery location (n*n >= 5)");
}

double delivery_task_probability(Index i, Index num_resources) {
  if (num_resources == 1) return 0.5;
  return 0.1 + 0.4 * static_cast<double>(num_resources - i) / static_cast<double>(num_resources - 1);
}

double delivery_move_penalty(Index m, Index num_agents) {
  if (num_agents == 1) return -1.0;
  return -1.0 - 9.0 * static_cast<double>(m - 1) / static_cast<double>(num_agents - 1);
}

AuctionInstance gen_delivery(const DeliveryParams& params) {
  params.validate();
  Rng rng(params.seed);
  const Index n = params.grid_n, ns = n * n, no = params.num_resources;
  const Index na = 4 + no;

  // Locations, their task sets and the relocation target of each (location, task).
  std::vector<Index> cells(ns);
  std::iota(cells.begin(), cells.end(), Index{0});
  std::shuffle(cells.begin(), cells.end(), rng);
  const Index num_locations = ns / 5;
  std::vector<std::vector<Index>> target(ns, std::vector<Index>(no, -1));
  for (Index l = 0; l < num_locations; ++l)
    for (Index i = 0; i < no; ++i)
      if (uniform(rng) < delivery_task_probability(i + 1, no)) target[cells[l]][i] = uniform_index(rng, ns);

  // Delivery i needs resource i plus further distinct random resources.
  const Index per_action = std::min(params.resources_per_action, no);
  Eigen::MatrixXd rho = Eigen::MatrixXd::Zero(na, no);
  for (Index i = 0; i < no; ++i) {
    std::vector<Index> others;
    for (Index o = 0; o < no; ++o)
      if (o != i) others.push_back(o);
    std::shuffle(others.begin(), others.end(), rng);
    rho(4 + i, i) = 1.0;
    for (Index k = 0; k + 1 < per_action; ++k) rho(4 + i, others[k]) = 1.0;
  }

  Eigen::MatrixXd kappa(no, 1);
  for (Index i = 0; i < no; ++i) kappa(i, 0) = static_cast<double>(i + 1);
  const double cap = params.c_loc * static_cast<double>(no * (no + 1)) / 2.0;

  std::vector<Eigen::MatrixXd> p = zero_transitions(na, ns);
  const Index dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
  for (Index s = 0; s < ns; ++s) {
    const Index r = s / n, c = s % n;
    for (Index a = 0; a < 4; ++a) {
      const Index r2 = r + dr[a], c2 = c + dc[a];
      if (r2 < 0 || r2 >= n || c2 < 0 || c2 >= n) {
        p[a](s, s) = 1.0;
      } else {
        p[a](s, r2 * n + c2) += 0.8;
        p[a](s, s) += 0.2;
      }
    }
    for (Index i = 0; i < no; ++i) {
      const Index t = target[s][i];
      p[4 + i](s, t >= 0 ? t : s) = 1.0;
    }
  }

  AuctionInstance inst;
  inst.discount = kDeliveryDiscount;
  inst.kappa = kappa;
  inst.resources = numbered("o", no);
  inst.capacities = {"size"};
  inst.rho_hat.assign(no, static_cast<int>(std::floor(params.c_glob * static_cast<double>(params.num_agents) + 1e-9)));
  for (Index m = 0; m < params.num_agents; ++m) {
    Eigen::MatrixXd reward = Eigen::MatrixXd::Zero(ns, na);
    const double penalty = delivery_move_penalty(m + 1, params.num_agents);
    for (Index s = 0; s < ns; ++s) {
      for (Index a = 0; a < 4; ++a) reward(s, a) = penalty;
      for (Index i = 0; i < no; ++i)
        if (target[s][i] >= 0) reward(s, 4 + i) = 100.0 * static_cast<double>(i + 1) / static_cast<double>(no);
    }
    const Index start = uniform_index(rng, ns);
    ResourceSpec spec{inst.resources, inst.capacities, rho, kappa, Eigen::VectorXd::Constant(1, cap)};
    inst.agents.emplace_back(Mdp(p, reward, kDeliveryDiscount, point_mass(ns, start)), std::move(spec));
  }
  inst.validate();
  return inst;
}

// ---------------------------------------------------------------- utility construction

Index utility_state(const Bundle& z, int m) {
  Index idx = 0, stride = 1;
  for (int q : z) {
    idx += q * stride;
    stride *= m + 1;
  }
  return idx;
}

ConstrainedMdp gen_from_utility(const UtilityFn& f, int m, Index n, double discount) {
  require(m >= 1 && n >= 1, "need at least one unit and one resource");
  require(discount > 0.0 && discount < 1.0, "discount must lie in (0, 1)");
  double count = 1.0;
  for (Index i = 0; i < n; ++i) count *= m + 1;
  require(count <= 1e4, "(m+1)^n exceeds 10^4 bundle states");
  const Index nb = static_cast<Index>(count), ns = nb + 1, sink = nb;
  const Index na = 1 + m * n;

  std::vector<Bundle> bundles(nb, Bundle(n, 0));
  std::vector<double> value(nb);
  for (Index b = 0; b < nb; ++b) {
    Index rest = b;
    for (Index i = 0; i < n; ++i) {
      bundles[b][i] = static_cast<int>(rest % (m + 1));
      rest /= m + 1;
    }
    value[b] = f(bundles[b]);
    require(std::isfinite(value[b]), "utility must be finite");
  }
  for (Index b = 0; b < nb; ++b)
    for (Index i = 0; i < n; ++i)
      if (bundles[b][i] < m) {
        Bundle up = bundles[b];
        ++up[i];
        require(value[utility_state(up, m)] >= value[b] - 1e-12, "utility must be non-decreasing");
      }

  std::vector<Eigen::MatrixXd> p = zero_transitions(na, ns);
  Eigen::MatrixXd reward = Eigen::MatrixXd::Zero(ns, na);
  for (Index b = 0; b < nb; ++b) {
    const Bundle& z = bundles[b];
    int total = 0;
    for (int q : z) total += q;
    const double scaled = value[b] * std::pow(discount, -total);
    reward(b, 0) = scaled;
    p[0](b, sink) = 1.0;
    for (Index i = 0; i < n; ++i) {
      for (int j = 1; j <= m; ++j) {
        const Index a = 1 + i * m + (j - 1);
        if (z[i] == j - 1) {
          Bundle up = z;
          up[i] = j;
          p[a](b, utility_state(up, m)) = 1.0;
        } else {
          // Outside its domain the action mirrors a0, so it never adds value.
          p[a](b, sink) = 1.0;
          reward(b, a) = scaled;
        }
      }
    }
  }
  for (Index a = 0; a < na; ++a) p[a](sink, sink) = 1.0;

  Eigen::MatrixXd rho = Eigen::MatrixXd::Zero(na, n);
  for (Index i = 0; i < n; ++i)
    for (int j = 1; j <= m; ++j) rho(1 + i * m + (j - 1), i) = j;
  ResourceSpec spec{numbered("o", n), {}, rho, Eigen::MatrixXd::Zero(n, 0), Eigen::VectorXd::Zero(0)};
  return ConstrainedMdp(Mdp(std::move(p), std::move(reward), discount, point_mass(ns, 0)), std::move(spec));
}

// ---------------------------------------------------------------- knapsack

void KnapsackInstance::validate() const {
  require(bound >= 0.0 && std::isfinite(bound), "knapsack bound must be finite and nonnegative");
  for (const auto& it : items) {
    require(it.cost > 0.0 && it.value > 0.0, "knapsack costs and values must be positive");
    require(it.cost == std::floor(it.cost) && it.cost <= 1e6, "knapsack costs must be integers");
  }
}

double knapsack_dp(const KnapsackInstance& inst) {
  inst.validate();
  const auto cap = static_cast<std::size_t>(std::floor(inst.bound + 1e-9));
  std::vector<double> best(cap + 1, 0.0);
  for (const auto& it : inst.items) {
    const auto c = static_cast<std::size_t>(it.cost);
    for (std::size_t w = cap + 1; w-- > c;) best[w] = std::max(best[w], best[w - c] + it.value);
  }
  return best[cap];
}

KnapsackMdp gen_from_knapsack(const KnapsackInstance& inst, double discount) {
  inst.validate();
  require(discount > 0.0 && discount < 1.0, "discount must lie in (0, 1)");
  const Index m = static_cast<Index>(inst.items.size());
  const Index ns = m + 1, na = m + 1;
  std::vector<Eigen::MatrixXd> p = zero_transitions(na, ns);
  Eigen::MatrixXd reward = Eigen::MatrixXd::Zero(ns, na);
  for (Index s = 0; s < ns; ++s)
    for (Index a = 0; a < na; ++a) p[a](s, std::min(s + 1, m)) = 1.0;
  // State s_i (index i-1) is reached after i-1 steps.
  for (Index i = 1; i <= m; ++i)
    reward(i - 1, i) = inst.items[i - 1].value * std::pow(discount, static_cast<double>(1 - i));

  Eigen::MatrixXd rho = Eigen::MatrixXd::Zero(na, m);
  Eigen::MatrixXd kappa(m, 1);
  for (Index i = 1; i <= m; ++i) {
    rho(i, i - 1) = 1.0;
    kappa(i - 1, 0) = inst.items[i - 1].cost;
  }
  ResourceSpec spec{numbered("o", m), {"c1"}, rho, kappa, Eigen::VectorXd::Constant(1, inst.bound)};
  KnapsackMdp out{ConstrainedMdp(Mdp(std::move(p), std::move(reward), discount, point_mass(ns, 0)), std::move(spec)),
                  knapsack_dp(inst)};
  return out;
}

KnapsackInstance random_knapsack(std::uint64_t seed, Index max_items) {
  require(max_items >= 1, "need at least one item");
  Rng rng(seed);
  KnapsackInstance inst;
  const Index count = 1 + uniform_index(rng, max_items);
  double total = 0.0;
  for (Index i = 0; i < count; ++i) {
    KnapsackItem it;
    it.cost = static_cast<double>(1 + uniform_index(rng, 10));
    it.value = std::round(uniform(rng, 1.0, 20.0) * 100.0) / 100.0;
    total += it.cost;
    inst.items.push_back(it);
  }
  inst.bound = std::floor(uniform(rng, 0.2, 0.8) * total);
  return inst;
}

// ---------------------------------------------------------------- random instances

namespace {

std::vector<Eigen::MatrixXd> random_transitions(Rng& rng, Index ns, Index na) {
  std::vector<Eigen::MatrixXd> p = zero_transitions(na, ns);
  for (Index s = 0; s < ns; ++s) p[0](s, s) = 1.0;
  for (Index a = 1; a < na; ++a) {
    for (Index s = 0; s < ns; ++s) {
      const Index k = 1 + uniform_index(rng, std::min<Index>(3, ns));
      double total = 0.0;
      for (Index q = 0; q < k; ++q) {
        const double w = uniform(rng, 0.1, 1.0);
        p[a](s, uniform_index(rng, ns)) += w;
        total += w;
      }
      p[a].row(s) /= total;
    }
  }
  return p;
}

Eigen::MatrixXd random_rewards(Rng& rng, Index ns, Index na) {
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(ns, na);
  for (Index s = 0; s < ns; ++s)
    for (Index a = 1; a < na; ++a) r(s, a) = std::round(uniform(rng, -2.0, 10.0) * 100.0) / 100.0;
  return r;
}

Eigen::MatrixXd random_rho(Rng& rng, Index na, Index no, bool binary, int max_rho) {
  Eigen::MatrixXd rho = Eigen::MatrixXd::Zero(na, no);
  if (no == 0) return rho;
  for (Index a = 1; a < na; ++a) {
    const Index k = 1 + uniform_index(rng, std::min<Index>(2, no));
    for (Index q = 0; q < k; ++q)
      rho(a, uniform_index(rng, no)) = binary ? 1.0 : static_cast<double>(1 + uniform_index(rng, max_rho));
  }
  return rho;
}

Eigen::MatrixXd random_kappa(Rng& rng, Index no, Index nc) {
  Eigen::MatrixXd k(no, nc);
  for (Index o = 0; o < no; ++o)
    for (Index c = 0; c < nc; ++c) k(o, c) = static_cast<double>(1 + uniform_index(rng, 4));
  return k;
}

Eigen::VectorXd random_kappa_hat(Rng& rng, const Eigen::MatrixXd& kappa, double max_rho) {
  Eigen::VectorXd h(kappa.cols());
  for (Index c = 0; c < kappa.cols(); ++c)
    h(c) = std::floor(uniform(rng, 0.3, 0.8) * kappa.col(c).sum() * max_rho);
  return h;
}

Eigen::VectorXd random_initial(Rng& rng, Index ns) {
  if (uniform(rng) < 0.5) return point_mass(ns, uniform_index(rng, ns));
  Eigen::VectorXd v(ns);
  for (Index s = 0; s < ns; ++s) v(s) = uniform(rng, 0.1, 1.0);
  return v / v.sum();
}

}  // namespace

ConstrainedMdp random_cmdp(const RandomCmdpParams& prm, std::uint64_t seed) {
  require(prm.num_states >= 1 && prm.num_actions >= 2 && prm.num_resources >= 0 && prm.num_capacities >= 0,
          "random CMDP needs at least one state and two actions");
  require(prm.max_rho >= 1, "max_rho must be at least 1");
  Rng rng(seed);
  const Index ns = prm.num_states, na = prm.num_actions, no = prm.num_resources, nc = prm.num_capacities;
  auto p = random_transitions(rng, ns, na);
  Eigen::MatrixXd r = random_rewards(rng, ns, na);
  Eigen::MatrixXd rho = random_rho(rng, na, no, prm.binary_rho, prm.max_rho);
  Eigen::MatrixXd kappa = random_kappa(rng, no, nc);
  Eigen::VectorXd kappa_hat = random_kappa_hat(rng, kappa, prm.binary_rho ? 1.0 : prm.max_rho);
  Eigen::VectorXd alpha = random_initial(rng, ns);
  ResourceSpec spec{numbered("o", no), numbered("c", nc), rho, kappa, kappa_hat};
  return ConstrainedMdp(Mdp(std::move(p), std::move(r), prm.discount, std::move(alpha)), std::move(spec));
}

AuctionInstance random_auction(const RandomAuctionParams& prm, std::uint64_t seed) {
  require(prm.num_agents >= 1, "random auction needs at least one agent");
  Rng rng(seed);
  const Index ns = prm.num_states, na = prm.num_actions, no = prm.num_resources, nc = prm.num_capacities;
  AuctionInstance inst;
  inst.discount = prm.discount;
  inst.kappa = random_kappa(rng, no, nc);
  inst.resources = numbered("o", no);
  inst.capacities = numbered("c", nc);
  for (Index o = 0; o < no; ++o) inst.rho_hat.push_back(static_cast<int>(uniform_index(rng, prm.num_agents + 1)));
  for (Index m = 0; m < prm.num_agents; ++m) {
    auto p = random_transitions(rng, ns, na);
    Eigen::MatrixXd r = random_rewards(rng, ns, na);
    Eigen::MatrixXd rho = random_rho(rng, na, no, true, 1);
    Eigen::VectorXd kappa_hat = random_kappa_hat(rng, inst.kappa, 1.0);
    Eigen::VectorXd alpha = random_initial(rng, ns);
    ResourceSpec spec{inst.resources, inst.capacities, rho, inst.kappa, kappa_hat};
    inst.agents.emplace_back(Mdp(std::move(p), std::move(r), prm.discount, std::move(alpha)), std::move(spec));
  }
  inst.validate();
  return inst;
}

// ---------------------------------------------------------------- worked example

ConstrainedMdp delivery_example_agent(double appliance_reward, Index initial_state) {
  require(initial_state >= 0 && initial_state < 3, "initial state must be 0, 1 or 2");
  const Index ns = 3, na = 5;
  std::vector<Eigen::MatrixXd> p(na, Eigen::MatrixXd::Identity(ns, ns));
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(ns, na);
  // a1: furniture delivery in s1 and s2.
  r(0, 1) = 5.0;
  r(1, 1) = 5.0;
  // a2: appliance delivery; s1 wears into s2, which fails into s3 at rate 0.1.
  p[2].row(0) << 0.0, 1.0, 0.0;
  p[2].row(1) << 0.0, 0.9, 0.1;
  r(0, 2) = appliance_reward;
  r(1, 2) = appliance_reward;
  // a3: service in s2.
  p[3].row(1) << 1.0, 0.0, 0.0;
  r(1, 3) = 9.0;
  // a4: repair in s3.
  p[4].row(2) << 1.0, 0.0, 0.0;
  r(2, 4) = 1.0;

  Eigen::MatrixXd rho(na, 3);
  rho << 0, 0, 0,  //
      1, 0, 0,     //
      1, 1, 0,     //
      1, 0, 0,     //
      1, 0, 1;
  Eigen::MatrixXd kappa(3, 1);
  kappa << 2, 3, 4;
  ResourceSpec spec{{"truck", "forklift", "mechanic"}, {"money"}, rho, kappa, Eigen::VectorXd::Constant(1, 8.0)};
  return ConstrainedMdp(Mdp(std::move(p), std::move(r), 0.9, point_mass(ns, initial_state)), std::move(spec));
}

AuctionInstance delivery_example_auction() {
  AuctionInstance inst;
  inst.agents.push_back(delivery_example_agent(10.0, 0));
  inst.agents.push_back(delivery_example_agent(12.0, 0));
  inst.kappa = inst.agents[0].spec.kappa;
  inst.rho_hat = {2, 1, 1};
  inst.discount = 0.9;
  inst.resources = inst.agents[0].spec.resources;
  inst.capacities = inst.agents[0].spec.capacities;
  inst.validate();
  return inst;
}

}  // namespace mdpalloc
