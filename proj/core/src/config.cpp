#include "roadcast/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "roadcast/io.hpp"

namespace roadcast::cfg {

namespace {

struct KeySpec {
  const char* key;      // "section.key"
  const char* fallback;  // nullptr = required
};

const KeySpec kKeys[] = {
    {"scenario.strategy", "all"},
    {"scenario.k", "3"},
    {"scenario.prune_epsilon", "0.01"},
    {"scenario.seed", "1"},
    {"scenario.duration_s", "3600"},
    {"scenario.vehicle_count", "10"},
    {"scenario.ap_storage_bytes", "67108864"},
    {"scenario.read_through", "true"},
    {"radio.wireless_rate_mbps", "10"},
    {"radio.backhaul_rate_mbps", "5"},
    {"radio.lan_rate_mbps", "100"},
    {"radio.origin_latency_s", "0.1"},
    {"radio.notice_latency_s", "0.01"},
    {"radio.map_query_rtt_s", "0.005"},
    {"content.count", "2"},
    {"content.size_bytes", "4194304"},
    {"content.piece_size", "4096"},
    {"content.generation_size", "16"},
    {"content.popularity_zipf", "0.8"},
    {"mobility.mode", nullptr},
    {"mobility.topology", "random"},
    {"mobility.ap_count", "16"},
    {"mobility.edges_per_ap", "3"},
    {"mobility.trace_path", ""},
    {"mobility.map_path", ""},
    {"mobility.dwell_min_s", "10"},
    {"mobility.dwell_max_s", "60"},
    {"mobility.travel_min_s", "20"},
    {"mobility.travel_max_s", "120"},
    {"mobility.noise", "0"},
    {"planner.max_aps", "0"},
    {"planner.budget_bytes", "0"},
    {"planner.target_hit_prob", "0"},
    {"planner.quota_mode", "full"},
    {"planner.weighted_rank_sum", "false"},
    {"planner.map_mode", "snapshot"},
    {"planner.pin_timeout_s", "300"},
    {"planner.branching_cap", "8"},
    {"planner.max_gap_s", "600"},
};

bool known_key(const std::string& key) {
  for (const KeySpec& spec : kKeys)
    if (key == spec.key) return true;
  return false;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double to_double(const ParsedConfig& cfg, const std::string& key) {
  const std::string& value = cfg.get(key);
  try {
    std::size_t pos = 0;
    double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(cfg.line_of(key), key, key + ": not a number: '" + value + "'");
  }
}

std::uint64_t to_u64(const ParsedConfig& cfg, const std::string& key) {
  const std::string& value = cfg.get(key);
  try {
    std::size_t pos = 0;
    unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(cfg.line_of(key), key, key + ": not an integer: '" + value + "'");
  }
}

int to_int(const ParsedConfig& cfg, const std::string& key) {
  return static_cast<int>(to_u64(cfg, key));
}

bool to_bool(const ParsedConfig& cfg, const std::string& key) {
  const std::string& value = cfg.get(key);
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError(cfg.line_of(key), key, key + ": expected true/false, got '" + value + "'");
}

}  // namespace

const std::string& ParsedConfig::get(const std::string& key) const {
  auto it = entries.find(key);
  if (it == entries.end()) throw ConfigError(0, key, key + ": missing (no default)");
  return it->second.value;
}

int ParsedConfig::line_of(const std::string& key) const {
  auto it = entries.find(key);
  return it == entries.end() ? 0 : it->second.line;
}

ParsedConfig parse_config(std::istream& in) {
  ParsedConfig cfg;
  for (const KeySpec& spec : kKeys)
    if (spec.fallback) cfg.entries[spec.key] = {spec.fallback, 0};

  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string text = trim(line);
    if (text.empty() || text[0] == '#' || text[0] == ';') continue;
    if (text.front() == '[') {
      if (text.back() != ']')
        throw ConfigError(line_no, "", "line " + std::to_string(line_no) + ": malformed section");
      section = trim(text.substr(1, text.size() - 2));
      static const std::set<std::string> sections = {"scenario", "radio", "content", "mobility",
                                                     "planner"};
      if (!sections.contains(section))
        throw ConfigError(line_no, section,
                          "line " + std::to_string(line_no) + ": unknown section '" + section +
                              "'");
      continue;
    }
    std::size_t eq = text.find('=');
    if (eq == std::string::npos)
      throw ConfigError(line_no, "",
                        "line " + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(text.substr(0, eq));
    std::string value = trim(text.substr(eq + 1));
    if (section.empty())
      throw ConfigError(line_no, key,
                        "line " + std::to_string(line_no) + ": key outside any section");
    std::string full = section + "." + key;
    if (!known_key(full))
      throw ConfigError(line_no, full,
                        "line " + std::to_string(line_no) + ": unknown key '" + full + "'");
    cfg.entries[full] = {value, line_no};
  }
  return cfg;
}

ParsedConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io::IoError("cannot open " + path);
  return parse_config(in);
}

LoadedScenario build_scenario(const ParsedConfig& cfg,
                              std::optional<std::uint64_t> seed_override) {
  LoadedScenario loaded;
  sim::Scenario& sc = loaded.scenario;

  sc.seed = seed_override.value_or(to_u64(cfg, "scenario.seed"));
  sc.k = to_int(cfg, "scenario.k");
  sc.prune_epsilon = to_double(cfg, "scenario.prune_epsilon");
  sc.duration_s = to_double(cfg, "scenario.duration_s");
  sc.vehicle_count = to_int(cfg, "scenario.vehicle_count");
  sc.ap_storage_bytes = to_u64(cfg, "scenario.ap_storage_bytes");
  sc.read_through = to_bool(cfg, "scenario.read_through");

  sc.wireless_rate_bps = to_double(cfg, "radio.wireless_rate_mbps") * 1e6;
  sc.backhaul_rate_bps = to_double(cfg, "radio.backhaul_rate_mbps") * 1e6;
  sc.lan_rate_bps = to_double(cfg, "radio.lan_rate_mbps") * 1e6;
  sc.origin_latency_s = to_double(cfg, "radio.origin_latency_s");
  sc.notice_latency_s = to_double(cfg, "radio.notice_latency_s");
  sc.map_query_rtt_s = to_double(cfg, "radio.map_query_rtt_s");

  int content_count = to_int(cfg, "content.count");
  if (content_count < 1)
    throw ConfigError(cfg.line_of("content.count"), "content.count",
                      "content.count: need at least one content");
  for (int i = 0; i < content_count; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "C%02d", i);
    node::ContentItem item;
    item.content_id = id;
    item.size_bytes = to_u64(cfg, "content.size_bytes");
    item.piece_size = to_u64(cfg, "content.piece_size");
    item.generation_size = to_int(cfg, "content.generation_size");
    sc.contents.push_back(std::move(item));
  }
  sc.popularity_zipf = to_double(cfg, "content.popularity_zipf");

  const std::string& strategy = cfg.get("scenario.strategy");
  loaded.strategy_name = strategy;
  planner::SelectionBudget budget;
  if (std::uint64_t v = to_u64(cfg, "planner.max_aps")) budget.max_aps = static_cast<int>(v);
  if (std::uint64_t v = to_u64(cfg, "planner.budget_bytes")) budget.max_total_prefetch_bytes = v;
  if (double v = to_double(cfg, "planner.target_hit_prob"); v > 0) budget.target_hit_prob = v;
  if (strategy == "all")
    sc.strategy = planner::Strategy::all();
  else if (strategy == "mpp")
    sc.strategy = planner::Strategy::mpp();
  else if (strategy == "representative")
    sc.strategy = planner::Strategy::representative(budget);
  else if (strategy == "none")
    sc.strategy.reset();
  else
    throw ConfigError(cfg.line_of("scenario.strategy"), "scenario.strategy",
                      "scenario.strategy: unknown strategy '" + strategy + "'");

  const std::string& quota = cfg.get("planner.quota_mode");
  if (quota == "full")
    sc.planner_options.quota_mode = planner::QuotaMode::Full;
  else if (quota == "split")
    sc.planner_options.quota_mode = planner::QuotaMode::Split;
  else
    throw ConfigError(cfg.line_of("planner.quota_mode"), "planner.quota_mode",
                      "planner.quota_mode: expected full or split");
  sc.planner_options.weighted_rank_sum = to_bool(cfg, "planner.weighted_rank_sum");

  const std::string& map_mode = cfg.get("planner.map_mode");
  if (map_mode == "snapshot")
    sc.map_mode = sim::MapMode::Snapshot;
  else if (map_mode == "distributed")
    sc.map_mode = sim::MapMode::Distributed;
  else
    throw ConfigError(cfg.line_of("planner.map_mode"), "planner.map_mode",
                      "planner.map_mode: expected snapshot or distributed");
  sc.pin_timeout_s = to_double(cfg, "planner.pin_timeout_s");
  sc.branching_cap = to_int(cfg, "planner.branching_cap");
  double max_gap_s = to_double(cfg, "planner.max_gap_s");

  sc.mobility.dwell_s = {to_double(cfg, "mobility.dwell_min_s"),
                         to_double(cfg, "mobility.dwell_max_s")};
  sc.mobility.travel_s = {to_double(cfg, "mobility.travel_min_s"),
                          to_double(cfg, "mobility.travel_max_s")};
  sc.mobility.noise = to_double(cfg, "mobility.noise");

  const std::string& mode = cfg.get("mobility.mode");
  if (mode == "markov") {
    sc.mobility.mode = sim::MobilityMode::Markov;
    const std::string& topology = cfg.get("mobility.topology");
    int ap_count = to_int(cfg, "mobility.ap_count");
    if (topology == "chain")
      sc.graph = sim::chain_topology(ap_count);
    else if (topology == "ring")
      sc.graph = sim::ring_topology(ap_count);
    else if (topology == "grid")
      sc.graph = sim::grid_topology(ap_count);
    else if (topology == "random") {
      Rng rng(derive_seed(sc.seed, "topology"));
      sc.graph = sim::random_topology(ap_count, to_int(cfg, "mobility.edges_per_ap"), rng);
    } else {
      throw ConfigError(cfg.line_of("mobility.topology"), "mobility.topology",
                        "mobility.topology: unknown topology '" + topology + "'");
    }
  } else if (mode == "trace") {
    sc.mobility.mode = sim::MobilityMode::Trace;
    const std::string& path = cfg.get("mobility.trace_path");
    if (path.empty())
      throw ConfigError(cfg.line_of("mobility.trace_path"), "mobility.trace_path",
                        "mobility.trace_path: required in trace mode");
    sc.mobility.trace = io::read_trace_file(path);
    sc.graph = map::learn_from_trace(sc.mobility.trace, max_gap_s);
  } else {
    throw ConfigError(cfg.line_of("mobility.mode"), "mobility.mode",
                      "mobility.mode: expected markov or trace, got '" + mode + "'");
  }

  const std::string& map_path = cfg.get("mobility.map_path");
  if (!map_path.empty()) sc.planner_graph = io::read_map_file(map_path);

  auto errors = sc.validate();
  if (!errors.empty()) {
    const std::string& first = errors.front();
    std::string field = first.substr(0, first.find(':'));
    throw ConfigError(0, field, first);
  }
  return loaded;
}

std::string sample_config() {
  return R"(# roadcast scenario configuration
# Every key below is shown at its default. mobility.mode has no default.

[scenario]
# all = notify every lookahead AP; mpp = only the most probable path;
# representative = greedy budgeted selection; none = prefetching disabled
strategy = all
# lookahead depth in hops
k = 3
prune_epsilon = 0.01
seed = 1
duration_s = 3600
vehicle_count = 10
ap_storage_bytes = 67108864
read_through = true

[radio]
# WiFi-class access rate between an AP and a vehicle
wireless_rate_mbps = 10
# wired rate from an AP to the internet; typical residential median,
# deliberately below the wireless rate so the backhaul is the bottleneck
backhaul_rate_mbps = 5
# inter-AP LAN port rate
lan_rate_mbps = 100
# first-byte delay of the remote origin server, charged once per flow
origin_latency_s = 0.1
notice_latency_s = 0.01
map_query_rtt_s = 0.005

[content]
count = 2
size_bytes = 4194304
piece_size = 4096
generation_size = 16
popularity_zipf = 0.8

[mobility]
# markov = synthetic walks over a generated topology; trace = replay a CSV
mode = markov
topology = random
ap_count = 16
edges_per_ap = 3
trace_path =
map_path =
# contact duration: tens of seconds of coverage per AP
dwell_min_s = 10
dwell_max_s = 60
travel_min_s = 20
travel_max_s = 120
# per-hop probability that a vehicle deviates from the learned map
noise = 0

[planner]
# representative budget: 0 leaves a limit unset
max_aps = 0
budget_bytes = 0
target_hit_prob = 0
quota_mode = full
weighted_rank_sum = false
map_mode = snapshot
pin_timeout_s = 300
branching_cap = 8
max_gap_s = 600
)";
}

}  // namespace roadcast::cfg
