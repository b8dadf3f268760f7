#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "roadcast/contact_map.hpp"
#include "roadcast/node.hpp"
#include "roadcast/planner.hpp"
#include "roadcast/rng.hpp"

namespace roadcast::sim {

struct UniformRange {
  double lo = 0;
  double hi = 0;
  double sample(Rng& rng) const { return lo >= hi ? lo : rng.uniform(lo, hi); }
  double mean() const { return (lo + hi) / 2; }
};

enum class MobilityMode { Markov, Trace };
enum class MapMode { Snapshot, Distributed };

struct MobilityConfig {
  MobilityMode mode = MobilityMode::Markov;
  UniformRange dwell_s{10, 60};
  UniformRange travel_s{20, 120};
  double noise = 0;  // per-hop probability of deviating from the learned model
  std::vector<map::ContactRecord> trace;  // used in Trace mode
};

// Full experiment input. The seed fixes every random draw; identical
// scenarios produce identical reports.
struct Scenario {
  map::ContactGraph graph;  // ground-truth mobility model
  // Map the planner predicts with; defaults to the ground truth.
  std::optional<map::ContactGraph> planner_graph;

  std::uint64_t ap_storage_bytes = 64ull << 20;
  double wireless_rate_bps = 10e6;
  double backhaul_rate_bps = 5e6;
  double lan_rate_bps = 100e6;
  double origin_latency_s = 0.1;
  double notice_latency_s = 0.01;
  double map_query_rtt_s = 0.005;  // per tree level in Distributed map mode

  std::vector<node::ContentItem> contents;
  double popularity_zipf = 0.8;
  // Optional explicit workload (vehicle index -> content id); when empty,
  // every vehicle requests one zipf-sampled content at its first contact.
  std::vector<std::pair<int, std::string>> requests;

  int vehicle_count = 10;
  double duration_s = 3600;
  std::uint64_t seed = 1;

  std::optional<planner::Strategy> strategy = planner::Strategy::all();
  int k = 3;
  double prune_epsilon = 0.01;
  int branching_cap = 8;
  planner::PlannerOptions planner_options;
  MapMode map_mode = MapMode::Snapshot;
  double pin_timeout_s = 300;
  bool read_through = true;

  MobilityConfig mobility;

  // Contents preloaded at full rank on an AP before the run starts.
  std::vector<std::pair<map::ApId, std::string>> warm;

  // Re-verify storage and rate invariants after every event (tests only).
  bool paranoid_checks = false;

  // Empty when valid; otherwise "field: problem" entries.
  std::vector<std::string> validate() const;
};

enum class EventKind {
  VehicleArrive,
  VehicleDepart,
  FlowReallocate,
  FlowComplete,
  NoticeDeliver,
  PrefetchPieceArrive,
  RequestIssued,
};

struct Event {
  double time_s = 0;
  std::uint64_t sequence_no = 0;  // breaks ties, insertion order
  EventKind kind = EventKind::FlowReallocate;
  std::uint64_t flow_id = 0;
  std::uint32_t flow_version = 0;
  std::string vehicle;
  map::ApId ap;
  std::size_t notice_index = 0;
};

struct MetricsReport {
  double cache_hit_bytes_ratio = 0;
  double completion_fraction = 0;
  double mean_completion_s = 0;
  double backhaul_bytes = 0;
  double lan_bytes = 0;
  double wireless_bytes = 0;
  double wasted_prefetch_bytes = 0;
  std::uint64_t duplicate_pieces = 0;
  std::uint64_t evictions = 0;
  std::uint64_t declined_prefetches = 0;

  // Diagnostics (not part of the report CSV)
  bool no_requests = false;
  std::uint64_t contacts = 0;
  std::uint64_t serving_contacts = 0;  // contacts that delivered vehicle bytes
  std::uint64_t requests_issued = 0;
  std::uint64_t requests_completed = 0;
  std::uint64_t rejected_requests = 0;
  std::uint64_t notices_sent = 0;
  double cache_hit_bytes = 0;
  double total_vehicle_bytes = 0;
  double post_first_hit_bytes = 0;
  double post_first_total_bytes = 0;
};

// Runs the scenario's event loop to duration_s. Deterministic.
MetricsReport run(const Scenario& scenario);

// Markov walks over the graph's derived probabilities. Each vehicle enters
// at a uniformly chosen AP, dwells per dwell_s, travels per travel_s, and
// leaves the system at an AP with no observed successors. With noise > 0 a
// hop deviates to a uniformly random other AP with that probability.
std::vector<map::ContactRecord> generate_mobility(const map::ContactGraph& graph,
                                                  int vehicle_count, double duration_s,
                                                  UniformRange dwell_s, UniformRange travel_s,
                                                  Rng& rng, double noise = 0);

// Equal split of each link among its flows; a flow's rate is the minimum
// over the links it traverses.
std::vector<double> reallocate_rates(std::span<const double> link_capacity_Bps,
                                     std::span<const std::vector<int>> flow_links);

map::ApId ap_name(int index);
map::ContactGraph chain_topology(int ap_count);
map::ContactGraph ring_topology(int ap_count);
map::ContactGraph grid_topology(int ap_count);
map::ContactGraph random_topology(int ap_count, int out_degree, Rng& rng);

}  // namespace roadcast::sim
