#include <benchmark/benchmark.h>

#include <mdpalloc/benchgen.hpp>

using namespace mdpalloc;

namespace {

AuctionInstance delivery(Index agents, Index resources, double level, std::uint64_t seed = 0) {
  DeliveryParams p;
  p.num_agents = agents;
  p.num_resources = resources;
  p.c_loc = p.c_glob = level;
  p.seed = seed;
  return gen_delivery(p);
}

void BM_DualLp(benchmark::State& state) {
  RandomCmdpParams p;
  p.num_states = state.range(0);
  p.num_actions = 5;
  const LpProblem lp = build_dual_lp(random_cmdp(p, 1).mdp);
  for (auto _ : state) benchmark::DoNotOptimize(solve_lp(lp).objective);
}
BENCHMARK(BM_DualLp)->Arg(8)->Arg(25)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_KnapsackMilp(benchmark::State& state) {
  const KnapsackMdp km = gen_from_knapsack(random_knapsack(3, state.range(0)), 0.9);
  const SingleAgentMilp built = build_single_agent_milp(km.cmdp);
  for (auto _ : state) benchmark::DoNotOptimize(solve_milp(built.milp).objective);
}
BENCHMARK(BM_KnapsackMilp)->Arg(6)->Arg(12)->Unit(benchmark::kMillisecond);

void BM_MdpWdp(benchmark::State& state) {
  const AuctionInstance inst = delivery(3, state.range(0), 0.5);
  WdpOptions opt;
  opt.lexicographic_tiebreak = false;
  for (auto _ : state) benchmark::DoNotOptimize(solve_wdp(inst, opt).welfare);
}
BENCHMARK(BM_MdpWdp)->DenseRange(2, 8, 2)->Unit(benchmark::kMillisecond);

void BM_FlatWdp(benchmark::State& state) {
  const AuctionInstance inst = delivery(3, state.range(0), 0.5);
  WdpOptions opt;
  opt.lexicographic_tiebreak = false;
  for (auto _ : state) benchmark::DoNotOptimize(flat_wdp(inst, opt).welfare);
}
BENCHMARK(BM_FlatWdp)->DenseRange(2, 8, 2)->Unit(benchmark::kMillisecond);

// Constraint level in percent.
void BM_LevelProfile(benchmark::State& state) {
  const AuctionInstance inst = delivery(3, 8, state.range(0) / 100.0, 1);
  WdpOptions opt;
  opt.lexicographic_tiebreak = false;
  std::int64_t nodes = 0;
  for (auto _ : state) nodes = solve_wdp(inst, opt).stats.milp.nodes;
  state.counters["nodes"] = static_cast<double>(nodes);
}
BENCHMARK(BM_LevelProfile)->DenseRange(0, 100, 25)->Unit(benchmark::kMillisecond);

void BM_AgentScaling(benchmark::State& state) {
  const AuctionInstance inst = delivery(state.range(0), 4, 0.5);
  WdpOptions opt;
  opt.lexicographic_tiebreak = false;
  for (auto _ : state) benchmark::DoNotOptimize(solve_wdp(inst, opt).welfare);
}
BENCHMARK(BM_AgentScaling)->DenseRange(2, 6, 2)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
