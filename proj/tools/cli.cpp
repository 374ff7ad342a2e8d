#include "cli.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include <mdpalloc/benchgen.hpp>
#include <mdpalloc/errors.hpp>
#include <mdpalloc/json_io.hpp>

namespace mdpalloc::cli {

namespace {

struct SolveArgs {
  std::string input;
  std::string mode = "constrained";
  std::string out;
  bool global_norm = false;
  bool minimal_bundle = false;
};

struct AuctionArgs {
  std::string input;
  bool flat = false;
  bool mdp_wdp = false;
  bool vcg = false;
  int distributed = 0;
  std::string adversary;
  std::optional<std::uint64_t> encrypt_seed;
  bool no_tiebreak = false;
  int threads = 1;
  std::string out;
};

struct GenArgs {
  std::string what;
  std::string out;
  DeliveryParams delivery;
};

struct BenchArgs {
  SweepSpec spec;
  std::vector<double> levels;
  std::int64_t budget_ms = 60'000;
  std::string out;
};

void emit(const Json& j, const std::string& path, std::ostream& out) {
  if (path.empty())
    out << j.dump(2) << '\n';
  else
    write_json_file(path, j);
}

int cmd_solve(const SolveArgs& a, std::ostream& out) {
  const Json doc = read_json_file(a.input);
  if (a.mode == "mdp") {
    const Mdp mdp = mdp_from_json(doc);
    const MdpSolution sol = solve_mdp(mdp);
    Json j;
    j["status"] = "optimal";
    j["objective"] = sol.value;
    j["policy"] = to_json(sol.policy);
    j["stats"] = {{"lp_solves", 1}};
    emit(j, a.out, out);
    return kExitOk;
  }
  const ConstrainedMdp cmdp = cmdp_from_json(doc);
  ConstrainedOptions options;
  options.norm = a.global_norm ? Normalization::kGlobal : Normalization::kPerResource;
  options.nonbinary = a.mode == "constrained-nonbinary";
  options.minimal_bundle = a.minimal_bundle;
  const ConstrainedSolution sol = solve_constrained(cmdp, options);
  emit(constrained_report(sol), a.out, out);
  return sol.status == MilpStatus::kOptimal ? kExitOk : kExitInfeasible;
}

Allocation run_mdp_wdp(const AuctionInstance& inst, const AuctionArgs& a, const WdpOptions& options, Json& extra) {
  if (!a.distributed && !a.encrypt_seed) return solve_wdp(inst, options);

  std::optional<EncryptedAuction> enc;
  std::vector<AgentBid> bids;
  if (a.encrypt_seed) {
    enc = encrypt_auction(inst, *a.encrypt_seed);
    bids = enc->bids;
  } else {
    for (const auto& agent : inst.agents) bids.push_back(plain_bid(agent));
  }

  Allocation alloc;
  if (a.distributed) {
    const auto workers = workers::from_spec(a.distributed, a.adversary);
    DistributedWdp d = run_distributed_wdp(bids, inst.rho_hat, workers, {}, options.milp);
    extra["audit"] = to_json(d.audit);
    alloc = std::move(d.allocation);
  } else {
    alloc = solve_wdp_bids(bids, inst.rho_hat, options);
  }
  if (enc) {
    decrypt_allocation(inst, *enc, alloc);
    extra["encrypted"] = true;
  } else {
    attach_policies(inst, alloc);
  }
  return alloc;
}

int cmd_auction(const AuctionArgs& a, std::ostream& out) {
  if (a.vcg && (a.distributed || a.encrypt_seed))
    throw InputError("--vcg cannot be combined with --distributed or --encrypt-bids");
  if (!a.adversary.empty() && !a.distributed) throw InputError("--adversary requires --distributed");
  if (a.flat && (a.distributed || a.encrypt_seed) && !a.mdp_wdp)
    throw InputError("--distributed and --encrypt-bids apply to the MDP-based WDP only");
  const AuctionInstance inst = auction_from_json(read_json_file(a.input));

  WdpOptions options;
  options.lexicographic_tiebreak = !a.no_tiebreak;
  options.milp.threads = a.threads;
  const bool use_mdp = a.mdp_wdp || !a.flat;

  Json report;
  std::optional<double> mdp_welfare, flat_welfare;
  if (use_mdp) {
    Json extra = Json::object();
    Json r;
    if (a.vcg) {
      const VcgResult v = vcg_payments(inst, options);
      r = allocation_report(v.allocation, &v.payments);
      mdp_welfare = v.allocation.welfare;
    } else {
      const Allocation alloc = run_mdp_wdp(inst, a, options, extra);
      r = allocation_report(alloc);
      mdp_welfare = alloc.welfare;
    }
    for (auto& [k, v] : extra.items()) r[k] = v;
    report["mdp_wdp"] = std::move(r);
  }
  if (a.flat) {
    const Allocation alloc = flat_wdp(inst, options);
    report["flat"] = allocation_report(alloc);
    flat_welfare = alloc.welfare;
  }
  if (mdp_welfare && flat_welfare) report["welfare_difference"] = std::abs(*mdp_welfare - *flat_welfare);
  emit(report, a.out, out);
  return kExitOk;
}

int cmd_gen(const GenArgs& a, std::ostream& out) {
  Json j;
  if (a.what == "delivery") {
    a.delivery.validate();
    j = to_json(gen_delivery(a.delivery));
  } else if (a.what == "example-agent") {
    j = to_json(delivery_example_agent());
  } else {
    j = to_json(delivery_example_auction());
  }
  emit(j, a.out, out);
  return kExitOk;
}

int cmd_bench(BenchArgs a, std::ostream& out) {
  if (!a.levels.empty()) {
    a.spec.c_loc = a.levels;
    a.spec.c_glob = a.levels;
    a.spec.paired_levels = true;
  }
  a.spec.time_budget = std::chrono::milliseconds(a.budget_ms);
  const auto rows = run_sweep(a.spec);
  if (a.out.empty()) {
    write_csv(out, rows);
  } else {
    std::ofstream f(a.out);
    if (!f) throw InputError("cannot write '" + a.out + "'");
    write_csv(f, rows);
  }
  return kExitOk;
}

}  // namespace

int default_threads() {
  if (const char* env = std::getenv("MDPALLOC_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0 && v <= 1024) return static_cast<int>(v);
  }
  return 1;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Resource allocation among MDP-based agents"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "0.1.0");

  SolveArgs solve;
  auto* sc_solve = app.add_subcommand("solve", "Solve a single agent's (constrained) MDP");
  sc_solve->add_option("input", solve.input, "Agent JSON")->required()->check(CLI::ExistingFile);
  sc_solve->add_option("--mode", solve.mode, "mdp | constrained | constrained-nonbinary")
      ->check(CLI::IsMember({"mdp", "constrained", "constrained-nonbinary"}));
  sc_solve->add_flag("--global-norm", solve.global_norm, "Single normalization constant across resources");
  sc_solve->add_flag("--minimal-bundle", solve.minimal_bundle, "Prefer the smallest optimal bundle");
  sc_solve->add_option("--out", solve.out, "Write the JSON report here instead of stdout");

  AuctionArgs auction;
  auction.threads = default_threads();
  std::uint64_t encrypt_seed = 0;
  auto* sc_auction = app.add_subcommand("auction", "Allocate shared resources among agents");
  sc_auction->add_option("input", auction.input, "Auction JSON")->required()->check(CLI::ExistingFile);
  sc_auction->add_flag("--flat", auction.flat, "Bundle-enumeration baseline");
  sc_auction->add_flag("--mdp-wdp", auction.mdp_wdp, "MDP-based winner determination (default)");
  sc_auction->add_flag("--vcg", auction.vcg, "Compute VCG payments");
  auto* opt_dist = sc_auction->add_option("--distributed", auction.distributed, "Number of untrusted workers")
                       ->check(CLI::Range(1, 1024));
  sc_auction->add_option("--adversary", auction.adversary, "kind:worker,... e.g. inflate:1")->needs(opt_dist);
  auto* opt_enc = sc_auction->add_option("--encrypt-bids", encrypt_seed, "Transform bids with this seed");
  sc_auction->add_flag("--no-tiebreak", auction.no_tiebreak, "Skip the lexicographic tie-break pass");
  sc_auction->add_option("--threads", auction.threads, "Branch-and-bound threads")->check(CLI::Range(1, 1024));
  sc_auction->add_option("--out", auction.out, "Write the JSON report here instead of stdout");

  BenchArgs bench;
  bench.spec.threads = default_threads();
  auto* sc_bench = app.add_subcommand("bench", "Sweep delivery instances and write CSV rows");
  sc_bench->add_option("--levels", bench.levels, "Paired constraint levels (c_loc = c_glob)")->delimiter(',');
  sc_bench->add_option("--c-loc", bench.spec.c_loc, "Local constraint levels")->delimiter(',');
  sc_bench->add_option("--c-glob", bench.spec.c_glob, "Global constraint levels")->delimiter(',');
  sc_bench->add_option("--resources", bench.spec.num_resources, "Resource counts")->delimiter(',');
  sc_bench->add_option("--agents", bench.spec.num_agents, "Agent counts")->delimiter(',');
  sc_bench->add_option("--rpa", bench.spec.resources_per_action, "Resources per action")->delimiter(',');
  sc_bench->add_option("--grid", bench.spec.grid_n, "Grid side length");
  sc_bench->add_option("--reps", bench.spec.repetitions, "Repetitions per cell");
  sc_bench->add_option("--seed-base", bench.spec.seed_base, "Seed of repetition 0");
  sc_bench->add_option("--solver", bench.spec.solvers, "mdp-wdp, flat or both")->delimiter(',');
  sc_bench->add_option("--time-budget-ms", bench.budget_ms, "Per-cell time budget");
  sc_bench->add_option("--threads", bench.spec.threads, "Cells run concurrently");
  sc_bench->add_flag("--tiebreak", bench.spec.tiebreak, "Enable the lexicographic tie-break pass");
  sc_bench->add_option("--out", bench.out, "CSV path instead of stdout");
  sc_bench->get_option("--levels")->excludes(sc_bench->get_option("--c-loc"));
  sc_bench->get_option("--levels")->excludes(sc_bench->get_option("--c-glob"));

  GenArgs gen;
  auto* sc_gen = app.add_subcommand("gen", "Write a generated instance as JSON");
  sc_gen->add_option("kind", gen.what, "delivery | example-agent | example-auction")
      ->required()
      ->check(CLI::IsMember({"delivery", "example-agent", "example-auction"}));
  sc_gen->add_option("--grid", gen.delivery.grid_n, "Grid side length");
  sc_gen->add_option("--agents", gen.delivery.num_agents, "Number of agents");
  sc_gen->add_option("--resources", gen.delivery.num_resources, "Number of resource types");
  sc_gen->add_option("--rpa", gen.delivery.resources_per_action, "Resources per delivery action");
  sc_gen->add_option("--c-loc", gen.delivery.c_loc, "Local constraint level");
  sc_gen->add_option("--c-glob", gen.delivery.c_glob, "Global constraint level");
  sc_gen->add_option("--seed", gen.delivery.seed, "Generator seed");
  sc_gen->add_option("--out", gen.out, "Output path instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitParse;
  }

  try {
    if (sc_solve->parsed()) return cmd_solve(solve, out);
    if (sc_auction->parsed()) {
      if (*opt_enc) auction.encrypt_seed = encrypt_seed;
      return cmd_auction(auction, out);
    }
    if (sc_bench->parsed()) return cmd_bench(bench, out);
    return cmd_gen(gen, out);
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kExitParse;
  } catch (const InputError& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitParse;
  } catch (const BudgetExceeded& e) {
    err << "budget exceeded: " << e.what() << '\n';
    return kExitBudget;
  } catch (const BlowupError& e) {
    err << "blowup guard: " << e.what() << '\n';
    return kExitBlowup;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace mdpalloc::cli
