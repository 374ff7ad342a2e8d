#pragma once

#include <cstdint>
#include <optional>

#include <Eigen/Dense>

#include "mdpalloc/auction.hpp"
#include "mdpalloc/lp.hpp"

namespace mdpalloc {

// Primal map u = F v and dual map y = D x, with D diagonal positive.
struct Transform {
  Eigen::VectorXd d;  // diagonal of D, size |S||A|
  Eigen::MatrixXd f;  // |S| x |S|

  static Transform identity(Index num_columns, Index num_rows);
  void validate() const;
};

// Equality-only maximization over y >= 0: objective D^-1 c, matrix F^-T A D^-1,
// rhs F^-T b.
using TransformedLp = LpProblem;

TransformedLp apply_transform(const LpProblem& lp, const Transform& t);
Eigen::VectorXd invert_solution(const Eigen::VectorXd& y, const Transform& t);
OccupationMeasure invert_solution(const Eigen::VectorXd& y, const Transform& t, Index num_states,
                                  Index num_actions);

// Seeded transform. With a target discount the transformed columns all sum to
// 1 - target; without one, D is drawn log-uniformly from [0.1, 10].
Transform random_transform(const LpProblem& lp, std::uint64_t seed,
                           std::optional<double> target_discount = std::nullopt);

// Column sums of the equality matrix, for the constant-sum check.
Eigen::VectorXd column_sums(const LpProblem& lp);

// What an agent publishes: its transformed LP plus the revealed resource data.
struct EncryptedBid {
  TransformedLp lp;
  Index num_actions = 0;
  Eigen::MatrixXd rho;
  Eigen::MatrixXd kappa;
  Eigen::VectorXd kappa_hat;
};

EncryptedBid encrypt_bid(const ConstrainedMdp& agent, const Transform& t);
// Auctioneer side: the mass bound is max 1^T y over the transformed polytope.
AgentBid bid_from_encrypted(const EncryptedBid& bid);

// Every agent encrypts its own bid with a transform seeded from `seed` + agent index.
struct EncryptedAuction {
  std::vector<AgentBid> bids;
  std::vector<Transform> transforms;  // agent-side secrets
};
EncryptedAuction encrypt_auction(const AuctionInstance& instance, std::uint64_t seed);
// Agent-side decryption of the allocated columns into occupation measures and policies.
void decrypt_allocation(const AuctionInstance& instance, const EncryptedAuction& enc, Allocation& alloc);

}  // namespace mdpalloc
