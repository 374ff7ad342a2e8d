#pragma once

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <mdpalloc/lp.hpp>

namespace mdpalloc::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitInfeasible = 2,
  kExitBudget = 3,
  kExitParse = 4,
  kExitBlowup = 5,
};

// Full command line including the program name.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// MDPALLOC_THREADS when set to a positive integer, else 1.
int default_threads();

struct SweepSpec {
  std::vector<double> c_loc{0.5};
  std::vector<double> c_glob{0.5};
  bool paired_levels = false;  // pair c_loc[i] with c_glob[i] instead of crossing them
  std::vector<Index> num_resources{4};
  std::vector<Index> num_agents{3};
  std::vector<Index> resources_per_action{2};
  Index grid_n = 5;
  int repetitions = 1;
  std::uint64_t seed_base = 0;
  std::vector<std::string> solvers{"mdp-wdp"};  // mdp-wdp | flat
  bool tiebreak = false;
  std::chrono::milliseconds time_budget{60'000};
  int threads = 1;

  void validate() const;  // throws InputError
};

struct BenchRow {
  std::string solver;
  Index grid_n = 0, num_agents = 0, num_resources = 0, resources_per_action = 0;
  double c_loc = 0.0, c_glob = 0.0;
  int rep = 0;
  std::uint64_t seed = 0;
  double wall_ms = 0.0;
  std::int64_t nodes = 0, lp_solves = 0;
  Index binary_vars = 0, valuation_solves = 0;
  double welfare = 0.0;
  std::string status;  // optimal | infeasible | timeout | blowup | error
};

inline constexpr int kBenchSchemaVersion = 1;
const std::vector<std::string>& bench_columns();

// Rows in cell order (levels, resources, agents, resources per action, solver), repetitions innermost.
std::vector<BenchRow> run_sweep(const SweepSpec& spec);
void write_csv(std::ostream& out, const std::vector<BenchRow>& rows);

}  // namespace mdpalloc::cli
