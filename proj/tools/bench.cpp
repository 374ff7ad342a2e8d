#include <atomic>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

#include <mdpalloc/benchgen.hpp>
#include <mdpalloc/errors.hpp>

#include "cli.hpp"

namespace mdpalloc::cli {

namespace {

struct Cell {
  std::string solver;
  DeliveryParams params;
  int rep = 0;
};

std::vector<std::pair<double, double>> level_pairs(const SweepSpec& s) {
  std::vector<std::pair<double, double>> out;
  if (s.paired_levels) {
    for (std::size_t i = 0; i < s.c_loc.size(); ++i) out.emplace_back(s.c_loc[i], s.c_glob[i]);
  } else {
    for (double l : s.c_loc)
      for (double g : s.c_glob) out.emplace_back(l, g);
  }
  return out;
}

BenchRow run_cell(const Cell& cell, const SweepSpec& spec) {
  BenchRow row;
  row.solver = cell.solver;
  row.grid_n = cell.params.grid_n;
  row.num_agents = cell.params.num_agents;
  row.num_resources = cell.params.num_resources;
  row.resources_per_action = cell.params.resources_per_action;
  row.c_loc = cell.params.c_loc;
  row.c_glob = cell.params.c_glob;
  row.rep = cell.rep;
  row.seed = cell.params.seed;

  WdpOptions options;
  options.lexicographic_tiebreak = spec.tiebreak;
  options.milp.time_limit = spec.time_budget;
  const auto start = std::chrono::steady_clock::now();
  try {
    const AuctionInstance inst = gen_delivery(cell.params);
    const Allocation a = cell.solver == "flat" ? flat_wdp(inst, options) : solve_wdp(inst, options);
    row.nodes = a.stats.milp.nodes;
    row.lp_solves = a.stats.milp.lp_solves;
    row.binary_vars = a.stats.binary_vars;
    row.valuation_solves = a.stats.valuation_solves;
    row.welfare = a.welfare;
    row.status = "optimal";
  } catch (const BudgetExceeded& e) {
    row.status = "timeout";
    if (e.incumbent()) {
      row.nodes = e.incumbent()->stats.nodes;
      row.lp_solves = e.incumbent()->stats.lp_solves;
    }
  } catch (const BlowupError&) {
    row.status = "blowup";
  } catch (const InputError& e) {
    row.status = std::string(e.what()).find("infeasible") != std::string::npos ? "infeasible" : "error";
  } catch (const std::exception&) {
    row.status = "error";
  }
  row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  // valuations cannot be interrupted, so an overlong flat run is classified afterwards
  if (row.status == "optimal" && row.wall_ms > static_cast<double>(spec.time_budget.count())) row.status = "timeout";
  return row;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

void SweepSpec::validate() const {
  auto nonempty = [](bool ok, const char* what) {
    if (!ok) throw InputError(std::string(what) + " axis must not be empty");
  };
  nonempty(!c_loc.empty(), "c_loc");
  nonempty(!c_glob.empty(), "c_glob");
  nonempty(!num_resources.empty(), "resources");
  nonempty(!num_agents.empty(), "agents");
  nonempty(!resources_per_action.empty(), "resources-per-action");
  nonempty(!solvers.empty(), "solver");
  if (paired_levels && c_loc.size() != c_glob.size()) throw InputError("paired levels need equal-length axes");
  if (repetitions < 1) throw InputError("repetitions must be at least 1");
  if (threads < 1) throw InputError("threads must be at least 1");
  if (time_budget.count() <= 0) throw InputError("time budget must be positive");
  for (const auto& s : solvers)
    if (s != "mdp-wdp" && s != "flat") throw InputError("unknown solver '" + s + "'");
  for (double c : c_loc)
    if (!(c >= 0.0 && c <= 1.0)) throw InputError("c_loc levels must lie in [0, 1]");
  for (double c : c_glob)
    if (!(c >= 0.0 && c <= 1.0)) throw InputError("c_glob levels must lie in [0, 1]");
}

const std::vector<std::string>& bench_columns() {
  static const std::vector<std::string> cols = {
      "schema_version", "solver",  "grid_n", "num_agents", "num_resources", "resources_per_action",
      "c_loc",          "c_glob",  "rep",    "seed",       "wall_ms",       "nodes",
      "lp_solves",      "binary_vars", "valuation_solves", "welfare",     "status"};
  return cols;
}

std::vector<BenchRow> run_sweep(const SweepSpec& spec) {
  spec.validate();
  std::vector<Cell> cells;
  for (const auto& [loc, glob] : level_pairs(spec))
    for (Index no : spec.num_resources)
      for (Index nm : spec.num_agents)
        for (Index rpa : spec.resources_per_action)
          for (const auto& solver : spec.solvers)
            for (int rep = 0; rep < spec.repetitions; ++rep) {
              Cell c;
              c.solver = solver;
              c.params.grid_n = spec.grid_n;
              c.params.num_agents = nm;
              c.params.num_resources = no;
              c.params.resources_per_action = rpa;
              c.params.c_loc = loc;
              c.params.c_glob = glob;
              c.params.seed = spec.seed_base + static_cast<std::uint64_t>(rep);
              c.params.validate();
              c.rep = rep;
              cells.push_back(std::move(c));
            }

  std::vector<BenchRow> rows(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) rows[i] = run_cell(cells[i], spec);
  };
  const int n = std::min<int>(spec.threads, static_cast<int>(cells.size()));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return rows;
}

void write_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  const auto& cols = bench_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << "\n";
  for (const auto& r : rows) {
    std::ostringstream line;
    line << std::setprecision(10);
    line << kBenchSchemaVersion << ',' << csv_field(r.solver) << ',' << r.grid_n << ',' << r.num_agents << ','
         << r.num_resources << ',' << r.resources_per_action << ',' << r.c_loc << ',' << r.c_glob << ',' << r.rep
         << ',' << r.seed << ',' << std::fixed << std::setprecision(3) << r.wall_ms << std::defaultfloat
         << std::setprecision(10) << ',' << r.nodes << ',' << r.lp_solves << ',' << r.binary_vars << ','
         << r.valuation_solves << ',' << r.welfare << ',' << csv_field(r.status);
    out << line.str() << "\n";
  }
}

}  // namespace mdpalloc::cli
