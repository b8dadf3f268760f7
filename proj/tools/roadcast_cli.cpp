// roadcast command line: learn contact maps from traces, inspect prefetch
// plans, run simulations, and summarize report CSVs.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "roadcast/config.hpp"
#include "roadcast/io.hpp"
#include "roadcast/lookahead.hpp"
#include "roadcast/node.hpp"
#include "roadcast/planner.hpp"
#include "roadcast/sim.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitIo = 3;

using namespace roadcast;

int cmd_learn(const std::string& trace_path, const std::string& out_path) {
  std::vector<map::ContactRecord> trace;
  try {
    trace = io::read_trace_file(trace_path);
  } catch (const io::CsvError& e) {
    std::cerr << "error: " << trace_path << " line " << e.line << ": " << e.what() << "\n";
    return kExitInput;
  } catch (const io::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }

  map::ContactGraph graph;
  try {
    graph = map::learn_from_trace(trace);
  } catch (const map::TraceError& e) {
    // +2: one for the header line, one for 1-based numbering
    std::cerr << "error: " << trace_path << " line " << e.record_index + 2 << ": " << e.what()
              << "\n";
    return kExitInput;
  }

  try {
    io::write_map_file(out_path, graph);
  } catch (const io::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitOk;
}

struct PlanArgs {
  std::string map_path;
  std::string root;
  int k = 3;
  std::string strategy = "mpp";
  std::uint64_t max_aps = 0;
  std::uint64_t budget_bytes = 0;
  double target_hit_prob = 0;
  double prune = 0.01;
  std::uint64_t content_size = 4194304;
  std::uint64_t piece_size = 4096;
  int generation_size = 16;
};

int cmd_plan(const PlanArgs& args) {
  map::ContactGraph graph;
  try {
    graph = io::read_map_file(args.map_path);
  } catch (const io::CsvError& e) {
    std::cerr << "error: " << args.map_path << " line " << e.line << ": " << e.what() << "\n";
    return kExitInput;
  } catch (const io::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }

  planner::SelectionBudget budget;
  if (args.max_aps) budget.max_aps = static_cast<int>(args.max_aps);
  if (args.budget_bytes) budget.max_total_prefetch_bytes = args.budget_bytes;
  if (args.target_hit_prob > 0) budget.target_hit_prob = args.target_hit_prob;

  planner::Strategy strategy;
  if (args.strategy == "all")
    strategy = planner::Strategy::all();
  else if (args.strategy == "mpp")
    strategy = planner::Strategy::mpp();
  else if (args.strategy == "representative") {
    if (!budget.any_limit()) {
      std::cerr << "error: representative needs --max-aps, --budget-bytes or"
                   " --target-hit-prob\n";
      return kExitInput;
    }
    strategy = planner::Strategy::representative(budget);
  } else {
    std::cerr << "error: unknown strategy '" << args.strategy << "'\n";
    return kExitInput;
  }

  map::LookaheadTree tree = [&] {
    try {
      return map::build_lookahead_tree(graph, args.root, args.k, {args.prune, 8});
    } catch (const std::invalid_argument& e) {
      std::cerr << "error: " << e.what() << "\n";
      std::exit(kExitInput);
    }
  }();

  if (tree.root_only()) {
    std::cout << planner::format_plan(tree, strategy, nullptr);
    return kExitOk;
  }

  // Nominal request: a cold vehicle missing the whole content.
  node::ContentItem item{"content", args.content_size, args.piece_size, args.generation_size};
  std::vector<planner::GenerationNeed> needed;
  for (std::uint32_t gen = 0; gen < item.generation_count(); ++gen)
    needed.push_back({gen, item.pieces_in_generation(gen)});

  planner::ContentShape shape{item.content_id, item.piece_size, item.generation_size};
  planner::TravelModel travel{70, 35};  // means of the default mobility ranges
  try {
    planner::PrefetchPlan plan =
        planner::make_plan("vehicle", shape, tree, strategy, args.content_size, needed, {},
                           travel, 0);
    std::cout << planner::format_plan(tree, strategy, &plan);
  } catch (const planner::NoPrediction&) {
    std::cout << planner::format_plan(tree, strategy, nullptr);
  }
  return kExitOk;
}

struct SimulateArgs {
  std::string config_path;
  std::string out_path;
  int repeat = 1;
  std::int64_t seed = -1;  // -1: use the config's seed
};

int cmd_simulate(const SimulateArgs& args) {
  cfg::ParsedConfig parsed;
  try {
    parsed = cfg::parse_config_file(args.config_path);
  } catch (const cfg::ConfigError& e) {
    std::cerr << "error: " << args.config_path << ": " << e.what() << "\n";
    return kExitInput;
  } catch (const io::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }

  std::uint64_t base_seed;
  try {
    base_seed = args.seed >= 0 ? static_cast<std::uint64_t>(args.seed)
                               : cfg::build_scenario(parsed).scenario.seed;
  } catch (const cfg::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const io::CsvError& e) {
    std::cerr << "error: line " << e.line << ": " << e.what() << "\n";
    return kExitInput;
  } catch (const io::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }

  std::string stem = std::filesystem::path(args.config_path).stem().string();

  std::vector<io::ReportRow> rows;
  for (int i = 0; i < args.repeat; ++i) {
    std::uint64_t seed = base_seed + static_cast<std::uint64_t>(i);
    cfg::LoadedScenario loaded;
    try {
      loaded = cfg::build_scenario(parsed, seed);
    } catch (const cfg::ConfigError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitInput;
    } catch (const io::CsvError& e) {
      std::cerr << "error: line " << e.line << ": " << e.what() << "\n";
      return kExitInput;
    } catch (const io::IoError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitIo;
    }

    io::ReportRow row;
    row.run_id = stem + "-s" + std::to_string(seed);
    row.strategy = loaded.strategy_name;
    row.seed = seed;
    row.metrics = sim::run(loaded.scenario);
    rows.push_back(std::move(row));
  }

  bool exists = std::filesystem::exists(args.out_path);
  std::ofstream out(args.out_path, std::ios::app);
  if (!out) {
    std::cerr << "error: cannot open " << args.out_path << " for writing\n";
    return kExitIo;
  }
  if (!exists) out << io::report_header() << '\n';
  for (const io::ReportRow& row : rows) out << io::format_report_row(row) << '\n';
  if (!out.flush()) {
    std::cerr << "error: failed writing " << args.out_path << "\n";
    return kExitIo;
  }
  return kExitOk;
}

int cmd_report(const std::vector<std::string>& paths) {
  std::vector<io::ReportRow> rows;
  for (const std::string& path : paths) {
    try {
      auto file_rows = io::read_report_file(path);
      rows.insert(rows.end(), file_rows.begin(), file_rows.end());
    } catch (const io::CsvError& e) {
      std::cerr << "error: " << path << " line " << e.line << ": " << e.what() << "\n";
      return kExitInput;
    } catch (const io::IoError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitIo;
    }
  }
  auto summaries = io::summarize(rows);
  std::cout << io::format_summary(summaries);
  return kExitOk;
}

int cmd_sample_config(const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << cfg::sample_config();
    return kExitOk;
  }
  std::ofstream out(out_path);
  if (!out) {
    std::cerr << "error: cannot open " << out_path << " for writing\n";
    return kExitIo;
  }
  out << cfg::sample_config();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cooperative roadside content distribution toolkit"};
  app.require_subcommand(1);

  std::string trace_path, learn_out;
  CLI::App* learn = app.add_subcommand("learn", "build a contact map from a trace CSV");
  learn->add_option("--trace", trace_path, "trace CSV")->required();
  learn->add_option("--out", learn_out, "output map CSV")->required();

  PlanArgs plan_args;
  CLI::App* plan = app.add_subcommand("plan", "inspect the prefetch plan for a serving AP");
  plan->add_option("--map", plan_args.map_path, "contact map CSV")->required();
  plan->add_option("--root", plan_args.root, "serving AP")->required();
  plan->add_option("--k", plan_args.k, "lookahead depth");
  plan->add_option("--strategy", plan_args.strategy, "all|mpp|representative");
  plan->add_option("--max-aps", plan_args.max_aps, "representative: AP count limit");
  plan->add_option("--budget-bytes", plan_args.budget_bytes, "representative: byte budget");
  plan->add_option("--target-hit-prob", plan_args.target_hit_prob,
                   "representative: stop at this hit probability");
  plan->add_option("--prune", plan_args.prune, "path probability pruning threshold");
  plan->add_option("--content-size", plan_args.content_size, "nominal content bytes");
  plan->add_option("--piece-size", plan_args.piece_size, "nominal piece bytes");
  plan->add_option("--gen-size", plan_args.generation_size, "nominal generation size");

  SimulateArgs sim_args;
  CLI::App* simulate = app.add_subcommand("simulate", "run scenarios and append report rows");
  simulate->add_option("--config", sim_args.config_path, "scenario config")->required();
  simulate->add_option("--out", sim_args.out_path, "report CSV to append to")->required();
  simulate->add_option("--repeat", sim_args.repeat, "number of runs (seeds base..base+N-1)")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim_args.seed, "base seed (default: config seed)");

  std::vector<std::string> report_paths;
  CLI::App* report = app.add_subcommand("report", "per-strategy means over report CSVs");
  report->add_option("files", report_paths, "report CSVs")->required();

  std::string sample_out;
  CLI::App* sample = app.add_subcommand("sample-config", "emit a commented default config");
  sample->add_option("--out", sample_out, "write to a file instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (learn->parsed()) return cmd_learn(trace_path, learn_out);
    if (plan->parsed()) return cmd_plan(plan_args);
    if (simulate->parsed()) return cmd_simulate(sim_args);
    if (report->parsed()) return cmd_report(report_paths);
    if (sample->parsed()) return cmd_sample_config(sample_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitOk;
}
