#include <gtest/gtest.h>

#include <mdpalloc/benchgen.hpp>
#include <mdpalloc/errors.hpp>
#include <mdpalloc/json_io.hpp>

using namespace mdpalloc;

namespace {

std::string fixture(const char* name) { return std::string(MDPALLOC_FIXTURE_DIR) + "/" + name; }

void expect_same_mdp(const Mdp& a, const Mdp& b) {
  ASSERT_EQ(a.num_states(), b.num_states());
  ASSERT_EQ(a.num_actions(), b.num_actions());
  EXPECT_EQ(a.discount(), b.discount());
  EXPECT_EQ(a.reward(), b.reward());
  EXPECT_EQ(a.initial(), b.initial());
  for (Index k = 0; k < a.num_actions(); ++k) EXPECT_EQ(a.transition(k), b.transition(k));
}

void expect_same_lp(const LpProblem& a, const LpProblem& b) {
  EXPECT_EQ(a.sense, b.sense);
  EXPECT_EQ(a.objective, b.objective);
  EXPECT_EQ(a.eq_matrix, b.eq_matrix);
  EXPECT_EQ(a.eq_rhs, b.eq_rhs);
  EXPECT_EQ(a.ineq_matrix, b.ineq_matrix);
  EXPECT_EQ(a.ineq_rhs, b.ineq_rhs);
  EXPECT_EQ(a.lower, b.lower);
  EXPECT_EQ(a.upper, b.upper);
}

}  // namespace

TEST(JsonIo, MdpRoundTrip) {
  const Mdp mdp = random_cmdp(RandomCmdpParams{}, 5).mdp;
  expect_same_mdp(mdp_from_json(Json::parse(to_json(mdp).dump())), mdp);
}

TEST(JsonIo, ConstrainedMdpRoundTrip) {
  const ConstrainedMdp a = delivery_example_agent();
  const ConstrainedMdp b = cmdp_from_json(Json::parse(to_json(a).dump()));
  expect_same_mdp(a.mdp, b.mdp);
  EXPECT_EQ(a.spec.rho, b.spec.rho);
  EXPECT_EQ(a.spec.kappa, b.spec.kappa);
  EXPECT_EQ(a.spec.kappa_hat, b.spec.kappa_hat);
  // an agent file is also a plain MDP file
  expect_same_mdp(mdp_from_json(to_json(a)), a.mdp);
}

TEST(JsonIo, AuctionRoundTrip) {
  const AuctionInstance a = delivery_example_auction();
  const AuctionInstance b = auction_from_json(Json::parse(to_json(a).dump()));
  ASSERT_EQ(a.num_agents(), b.num_agents());
  EXPECT_EQ(a.rho_hat, b.rho_hat);
  EXPECT_EQ(a.kappa, b.kappa);
  for (Index m = 0; m < a.num_agents(); ++m) expect_same_mdp(a.agents[m].mdp, b.agents[m].mdp);
  EXPECT_NEAR(solve_wdp(b).welfare, solve_wdp(a).welfare, 1e-12);
}

TEST(JsonIo, WireMessagesRoundTrip) {
  const LpProblem lp = node_relaxation(build_wdp_milp(delivery_example_auction()).milp, {});
  const WorkerTask task{"node-3", lp};
  const WorkerTask t2 = task_from_json(Json::parse(to_json(task).dump()));
  EXPECT_EQ(t2.task_id, "node-3");
  expect_same_lp(t2.relaxation, lp);

  const WorkerResponse resp = *workers::honest()(task);
  const WorkerResponse r2 = response_from_json(Json::parse(to_json(resp).dump()));
  EXPECT_EQ(r2.claimed.status, resp.claimed.status);
  EXPECT_EQ(r2.claimed.primal, resp.claimed.primal);
  EXPECT_EQ(r2.claimed.dual, resp.claimed.dual);
  EXPECT_EQ(r2.claimed.basis, resp.claimed.basis);
  EXPECT_TRUE(verify_solution(t2.relaxation, r2.claimed).accepted);
}

TEST(JsonIo, EncryptedBidRoundTrip) {
  const ConstrainedMdp agent = delivery_example_agent();
  const EncryptedBid bid = encrypt_bid(agent, random_transform(build_dual_lp(agent.mdp), 3));
  const EncryptedBid b2 = encrypted_bid_from_json(Json::parse(to_json(bid).dump()));
  expect_same_lp(b2.lp, bid.lp);
  EXPECT_EQ(b2.rho, bid.rho);
  EXPECT_EQ(b2.kappa_hat, bid.kappa_hat);
  EXPECT_EQ(b2.num_actions, bid.num_actions);
}

TEST(JsonIo, RejectsWrongWireVersion) {
  Json j = to_json(WorkerTask{"t", node_relaxation(build_wdp_milp(delivery_example_auction()).milp, {})});
  j["version"] = kWireVersion + 1;
  EXPECT_THROW(task_from_json(j), ParseError);
  j.erase("version");
  EXPECT_THROW(task_from_json(j), ParseError);
}

TEST(JsonIo, RejectsMalformedDocuments) {
  EXPECT_THROW(read_json_file(fixture("malformed.json")), ParseError);
  EXPECT_THROW(read_json_file(fixture("does_not_exist.json")), ParseError);
  Json j = to_json(delivery_example_agent());
  j.erase("reward");
  EXPECT_THROW(cmdp_from_json(j), ParseError);
  j = to_json(delivery_example_agent());
  j["reward"][0] = Json::array({1.0});
  EXPECT_THROW(cmdp_from_json(j), ParseError);
  j = to_json(delivery_example_agent());
  j["discount"] = 1.5;
  EXPECT_THROW(mdp_from_json(j), InputError);
}

TEST(JsonIo, FixturesLoad) {
  for (const char* f : {"example_agent.json", "zero_reward_agent.json", "infeasible_agent.json"})
    EXPECT_NO_THROW(cmdp_from_json(read_json_file(fixture(f)))) << f;
  for (const char* f : {"example_auction.json", "delivery_small.json", "delivery_medium.json"})
    EXPECT_NO_THROW(auction_from_json(read_json_file(fixture(f))).validate()) << f;
}
