#include "roadcast/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <queue>
#include <tuple>

#include "roadcast/lookahead.hpp"

namespace roadcast::sim {

namespace {
constexpr double kByteEps = 1e-6;
constexpr double kTimeEps = 1e-9;
}  // namespace

std::vector<std::string> Scenario::validate() const {
  std::vector<std::string> errors;
  if (graph.aps().empty()) errors.push_back("scenario.graph: no APs");
  if (ap_storage_bytes == 0) errors.push_back("scenario.ap_storage_bytes: must be positive");
  if (wireless_rate_bps <= 0) errors.push_back("radio.wireless_rate_mbps: must be positive");
  if (backhaul_rate_bps <= 0) errors.push_back("radio.backhaul_rate_mbps: must be positive");
  if (lan_rate_bps <= 0) errors.push_back("radio.lan_rate_mbps: must be positive");
  if (origin_latency_s < 0) errors.push_back("radio.origin_latency_s: must be non-negative");
  if (notice_latency_s < 0) errors.push_back("radio.notice_latency_s: must be non-negative");
  if (map_query_rtt_s < 0) errors.push_back("radio.map_query_rtt_s: must be non-negative");
  if (contents.empty()) errors.push_back("content.count: need at least one content");
  for (const auto& c : contents) {
    if (c.size_bytes == 0) errors.push_back("content.size_bytes: must be positive");
    if (c.piece_size == 0) errors.push_back("content.piece_size: must be positive");
    if (c.generation_size < 1 || c.generation_size > 255)
      errors.push_back("content.generation_size: must be in [1, 255]");
  }
  if (popularity_zipf < 0) errors.push_back("content.popularity_zipf: must be non-negative");
  if (vehicle_count < 0) errors.push_back("scenario.vehicle_count: must be non-negative");
  if (duration_s <= 0) errors.push_back("scenario.duration_s: must be positive");
  if (k < 0) errors.push_back("scenario.k: must be non-negative");
  if (prune_epsilon < 0 || prune_epsilon > 1)
    errors.push_back("scenario.prune_epsilon: must be in [0, 1]");
  if (branching_cap < 0) errors.push_back("planner.branching_cap: must be non-negative");
  if (pin_timeout_s < 0) errors.push_back("planner.pin_timeout_s: must be non-negative");
  if (strategy && strategy->kind == planner::StrategyKind::Representative &&
      !strategy->budget.any_limit())
    errors.push_back(
        "planner.max_aps|budget_bytes|target_hit_prob: representative needs at least one limit");
  if (strategy && strategy->budget.target_hit_prob &&
      (*strategy->budget.target_hit_prob <= 0 || *strategy->budget.target_hit_prob > 1))
    errors.push_back("planner.target_hit_prob: must be in (0, 1]");
  if (mobility.mode == MobilityMode::Trace && mobility.trace.empty() && vehicle_count > 0)
    errors.push_back("mobility.trace_path: trace mode needs contact records");
  if (mobility.dwell_s.lo < 0 || mobility.dwell_s.hi < mobility.dwell_s.lo)
    errors.push_back("mobility.dwell_min_s/dwell_max_s: invalid range");
  if (mobility.travel_s.lo < 0 || mobility.travel_s.hi < mobility.travel_s.lo)
    errors.push_back("mobility.travel_min_s/travel_max_s: invalid range");
  if (mobility.noise < 0 || mobility.noise > 1)
    errors.push_back("mobility.noise: must be in [0, 1]");
  std::map<map::ApId, std::uint64_t> warm_bytes;
  for (const auto& [ap, content] : warm) {
    if (!graph.aps().contains(ap)) errors.push_back("scenario.warm: unknown AP " + ap);
    bool found = false;
    for (const auto& c : contents)
      if (c.content_id == content) {
        found = true;
        // full-rank storage cost including the padded tail
        warm_bytes[ap] += static_cast<std::uint64_t>(c.generation_count()) *
                          c.generation_size * c.piece_size;
      }
    if (!found) errors.push_back("scenario.warm: unknown content " + content);
  }
  for (const auto& [ap, bytes] : warm_bytes)
    if (bytes > ap_storage_bytes)
      errors.push_back("scenario.warm: preloaded contents exceed storage at " + ap);
  for (const auto& rec : mobility.trace)
    if (!graph.aps().contains(rec.ap)) {
      errors.push_back("mobility.trace_path: AP " + rec.ap + " not in the contact graph");
      break;
    }
  for (const auto& [index, content] : requests)
    if (index < 0 || index >= vehicle_count)
      errors.push_back("scenario.requests: vehicle index out of range");
  return errors;
}

std::vector<double> reallocate_rates(std::span<const double> link_capacity_Bps,
                                     std::span<const std::vector<int>> flow_links) {
  std::vector<int> load(link_capacity_Bps.size(), 0);
  for (const auto& links : flow_links)
    for (int l : links) ++load[l];

  std::vector<double> rates(flow_links.size(), 0);
  for (std::size_t i = 0; i < flow_links.size(); ++i) {
    double rate = std::numeric_limits<double>::infinity();
    for (int l : flow_links[i]) rate = std::min(rate, link_capacity_Bps[l] / load[l]);
    rates[i] = std::isfinite(rate) ? rate : 0;
  }
  return rates;
}

map::ApId ap_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "AP%03d", index);
  return buf;
}

map::ContactGraph chain_topology(int ap_count) {
  map::ContactGraph g;
  for (int i = 0; i < ap_count; ++i) g.add_ap(ap_name(i));
  for (int i = 0; i + 1 < ap_count; ++i) g.observe(ap_name(i), ap_name(i + 1));
  return g;
}

map::ContactGraph ring_topology(int ap_count) {
  map::ContactGraph g;
  for (int i = 0; i < ap_count; ++i) g.add_ap(ap_name(i));
  for (int i = 0; i < ap_count && ap_count > 1; ++i)
    g.observe(ap_name(i), ap_name((i + 1) % ap_count));
  return g;
}

map::ContactGraph grid_topology(int ap_count) {
  int side = std::max(1, static_cast<int>(std::floor(std::sqrt(double(ap_count)))));
  int cols = side;
  int rows = (ap_count + cols - 1) / cols;
  auto index = [&](int r, int c) { return r * cols + c; };
  map::ContactGraph g;
  for (int i = 0; i < ap_count; ++i) g.add_ap(ap_name(i));
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      int i = index(r, c);
      if (i >= ap_count) continue;
      int neighbors[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
      for (auto& n : neighbors) {
        if (n[0] < 0 || n[1] < 0 || n[0] >= rows || n[1] >= cols) continue;
        int j = index(n[0], n[1]);
        if (j >= ap_count) continue;
        g.observe(ap_name(i), ap_name(j));
      }
    }
  return g;
}

map::ContactGraph random_topology(int ap_count, int out_degree, Rng& rng) {
  map::ContactGraph g;
  for (int i = 0; i < ap_count; ++i) g.add_ap(ap_name(i));
  if (ap_count < 2) return g;
  int degree = std::min(out_degree, ap_count - 1);
  for (int i = 0; i < ap_count; ++i) {
    std::vector<int> others;
    for (int j = 0; j < ap_count; ++j)
      if (j != i) others.push_back(j);
    for (int d = 0; d < degree; ++d) {
      std::size_t pick = static_cast<std::size_t>(rng.below(others.size()));
      int target = others[pick];
      others.erase(others.begin() + pick);
      g.add_count(ap_name(i), ap_name(target), 1 + rng.below(9));
    }
  }
  return g;
}

std::vector<map::ContactRecord> generate_mobility(const map::ContactGraph& graph,
                                                  int vehicle_count, double duration_s,
                                                  UniformRange dwell_s, UniformRange travel_s,
                                                  Rng& rng, double noise) {
  if (graph.aps().empty()) throw std::invalid_argument("generate_mobility: empty graph");
  std::vector<map::ApId> aps(graph.aps().begin(), graph.aps().end());

  std::vector<map::ContactRecord> records;
  for (int v = 0; v < vehicle_count; ++v) {
    char name[16];
    std::snprintf(name, sizeof name, "v%03d", v);

    double t = rng.uniform(0, duration_s / 10);
    map::ApId ap = aps[rng.below(aps.size())];
    while (t < duration_s) {
      double dwell = dwell_s.sample(rng);
      double depart = std::min(t + dwell, duration_s);
      records.push_back({t, name, ap, map::ContactEvent::Arrive});
      records.push_back({depart, name, ap, map::ContactEvent::Depart});
      if (depart >= duration_s) break;

      auto row = graph.row(ap);
      if (row.empty()) break;  // absorbing AP: the vehicle leaves the system

      map::ApId next;
      if (noise > 0 && aps.size() > 1 && rng.chance(noise)) {
        // Deviation from the learned model: any other AP, uniformly.
        do {
          next = aps[rng.below(aps.size())];
        } while (next == ap);
      } else {
        double u = rng.unit();
        double acc = 0;
        next = row.back().first;
        for (const auto& [candidate, p] : row) {
          acc += p;
          if (u < acc) {
            next = candidate;
            break;
          }
        }
      }
      t = depart + travel_s.sample(rng);
      ap = next;
    }
  }
  std::stable_sort(records.begin(), records.end(),
                   [](const map::ContactRecord& a, const map::ContactRecord& b) {
                     return a.time_s < b.time_s;
                   });
  return records;
}

namespace {

enum class FlowKind { CacheServe, FetchThrough, PrefetchOrigin, LanShare };

struct FlowRec {
  std::uint64_t id = 0;
  FlowKind kind = FlowKind::CacheServe;
  std::vector<int> links;
  double sized_bytes = 0;
  double delivered = 0;
  int pieces_total = 0;
  int pieces_done = 0;
  double rate = 0;
  double updated_at = 0;
  double gate_until = 0;
  std::uint32_t version = 0;
  bool pre_contact = false;

  std::string vehicle;  // receiver (serve kinds) or intended vehicle (prefetch kinds)
  map::ApId ap;         // serving AP, or the AP receiving the prefetch
  map::ApId src_ap;     // LAN peer for LanShare
  std::string content_id;
  std::deque<planner::Assignment> queue;  // generation order for prefetch kinds
  std::uint64_t reserved_remaining = 0;

  double remaining() const { return sized_bytes - delivered; }
  int pieces_remaining() const { return pieces_total - pieces_done; }
  bool serves_vehicle() const {
    return kind == FlowKind::CacheServe || kind == FlowKind::FetchThrough;
  }
};

struct ContactTally {
  double supply_snapshot = -1;  // set at the first serving evaluation of the contact
  double cache_delivered = 0;
  double total_delivered = 0;
};

struct RequestState {
  std::string content_id;
  double issued_at = 0;
  bool complete = false;
  double completed_at = 0;
  int contact_number = 0;
  int incomplete_generations = 0;
  std::uint64_t bytes_received = 0;
  std::map<std::uint32_t, coding::GenerationBuffer> buffers;
};

struct VehicleRec {
  std::string id;
  std::optional<map::ApId> at;
  double contact_start = 0;
  bool requested = false;
  std::optional<RequestState> request;
  ContactTally tally;
  std::uint64_t cache_flow = 0;  // 0 = none
  std::uint64_t fetch_flow = 0;
  std::vector<std::tuple<map::ApId, double, double>> history;
};

struct Notice {
  map::ApId target;
  std::string vehicle;
  std::string content_id;
  std::vector<planner::Assignment> assignments;
};

struct CreditKey {
  map::ApId ap;
  std::string content_id;
  std::uint32_t generation_id = 0;
  std::string vehicle;
  auto operator<=>(const CreditKey&) const = default;
};

struct Credit {
  int stored = 0;
  int used = 0;
};

struct EventCompare {
  bool operator()(const Event& a, const Event& b) const {
    if (a.time_s != b.time_s) return a.time_s > b.time_s;
    return a.sequence_no > b.sequence_no;
  }
};

class Engine {
 public:
  explicit Engine(const Scenario& sc)
      : sc_(sc),
        rngs_(sc.seed),
        coding_rng_(rngs_.stream("coding")),
        origin_(sc.origin_latency_s) {}

  MetricsReport run();

 private:
  // --- setup ---
  void setup_nodes();
  void setup_contents();
  void setup_workload();
  void setup_contacts();
  void warm_caches();

  int link_index(const std::string& name, double capacity);
  int wireless_link(const map::ApId& ap);
  int backhaul_link(const map::ApId& ap);
  int lan_port(const map::ApId& ap);

  // --- event machinery ---
  void push_event(Event ev);
  void schedule_flow_events(FlowRec& flow, double now);
  void reallocate(double now);
  void advance_flow(FlowRec& flow, double now);
  void deliver_piece(FlowRec& flow, double at);
  void drain_side_effects(double now);
  std::uint64_t spawn_flow(FlowRec flow, double now);
  void remove_flow(std::uint64_t id);

  // --- handlers ---
  void on_arrive(const Event& ev);
  void on_depart(const Event& ev);
  void on_request_issued(const Event& ev);
  void on_notice(const Event& ev);
  void on_flow_complete(const Event& ev);
  void on_piece_event(const Event& ev);

  // --- protocol steps ---
  void evaluate_serving(VehicleRec& v, double now);
  void plan_prefetch(VehicleRec& v, const map::ApId& ap_id, double now);
  // Union of the target AP's stored rows and the requesting vehicle's
  // reported rows: the feedback span prefetch senders code against.
  coding::CoeffRows union_rows(const map::ApId& ap, const std::string& content_id,
                               std::uint32_t gen, const std::string& vehicle) const;
  void flush_contact(VehicleRec& v, double now);
  void credit_use(const map::ApId& ap, const std::string& content, std::uint32_t gen,
                  const std::string& vehicle);
  void waste_entry(const map::ApId& ap, const node::CacheKey& key, std::size_t piece_size);
  void account_bytes(const FlowRec& flow, double bytes);
  const node::ContentItem& content_of(const std::string& id) const;

  void check_invariants(double now) const;
  void finalize(MetricsReport& report);

  const Scenario& sc_;
  RngSet rngs_;
  Rng coding_rng_;
  node::OriginServer origin_;

  std::map<map::ApId, node::ApNode> nodes_;
  std::map<std::string, VehicleRec> vehicles_;
  std::map<std::string, std::string> workload_content_;
  std::map<std::uint64_t, FlowRec> flows_;
  std::vector<double> link_capacity_;
  std::map<std::string, int> link_ids_;
  std::vector<Notice> notices_;
  std::map<CreditKey, Credit> credits_;

  std::priority_queue<Event, std::vector<Event>, EventCompare> queue_;
  std::uint64_t next_sequence_ = 0;
  std::uint64_t next_flow_id_ = 1;
  std::vector<std::string> pending_evals_;
  bool flows_dirty_ = false;

  MetricsReport metrics_;
  double completion_time_sum_ = 0;
};

void Engine::push_event(Event ev) {
  ev.sequence_no = next_sequence_++;
  queue_.push(std::move(ev));
}

int Engine::link_index(const std::string& name, double capacity) {
  auto it = link_ids_.find(name);
  if (it != link_ids_.end()) return it->second;
  link_capacity_.push_back(capacity);
  int id = static_cast<int>(link_capacity_.size()) - 1;
  link_ids_.emplace(name, id);
  return id;
}

int Engine::wireless_link(const map::ApId& ap) {
  return link_index("w:" + ap, sc_.wireless_rate_bps / 8.0);
}
int Engine::backhaul_link(const map::ApId& ap) {
  return link_index("b:" + ap, sc_.backhaul_rate_bps / 8.0);
}
int Engine::lan_port(const map::ApId& ap) {
  return link_index("l:" + ap, sc_.lan_rate_bps / 8.0);
}

void Engine::setup_nodes() {
  for (const map::ApId& ap : sc_.graph.aps())
    nodes_.emplace(ap, node::ApNode(ap, sc_.ap_storage_bytes));
}

void Engine::setup_contents() {
  Rng payload_rng = rngs_.stream("payload");
  for (const auto& item : sc_.contents) origin_.add_content(item, payload_rng.next_u64());
}

void Engine::setup_workload() {
  if (sc_.vehicle_count == 0) return;
  Rng workload = rngs_.stream("workload");

  std::vector<std::string> assigned(sc_.vehicle_count);
  std::vector<double> weights;
  double total = 0;
  for (std::size_t i = 0; i < sc_.contents.size(); ++i) {
    double w = std::pow(static_cast<double>(i + 1), -sc_.popularity_zipf);
    weights.push_back(w);
    total += w;
  }
  for (int v = 0; v < sc_.vehicle_count; ++v) {
    double u = workload.unit() * total;
    double acc = 0;
    assigned[v] = sc_.contents.back().content_id;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) {
        assigned[v] = sc_.contents[i].content_id;
        break;
      }
    }
  }
  for (const auto& [index, content] : sc_.requests) assigned[index] = content;

  for (int v = 0; v < sc_.vehicle_count; ++v) {
    char name[16];
    std::snprintf(name, sizeof name, "v%03d", v);
    VehicleRec rec;
    rec.id = name;
    vehicles_.emplace(rec.id, std::move(rec));
    workload_content_[name] = assigned[v];
  }
}

void Engine::setup_contacts() {
  const std::vector<map::ContactRecord>* trace = &sc_.mobility.trace;
  std::vector<map::ContactRecord> generated;
  if (sc_.mobility.mode == MobilityMode::Markov) {
    Rng mobility = rngs_.stream("mobility");
    generated = generate_mobility(sc_.graph, sc_.vehicle_count, sc_.duration_s,
                                  sc_.mobility.dwell_s, sc_.mobility.travel_s, mobility,
                                  sc_.mobility.noise);
    trace = &generated;
  }
  for (const auto& rec : *trace) {
    if (rec.time_s > sc_.duration_s) continue;
    Event ev;
    ev.time_s = rec.time_s;
    ev.kind = rec.event == map::ContactEvent::Arrive ? EventKind::VehicleArrive
                                                     : EventKind::VehicleDepart;
    ev.vehicle = rec.vehicle;
    ev.ap = rec.ap;
    push_event(std::move(ev));
    if (!vehicles_.contains(rec.vehicle)) {
      VehicleRec v;
      v.id = rec.vehicle;
      vehicles_.emplace(rec.vehicle, std::move(v));
    }
  }
}

void Engine::warm_caches() {
  for (const auto& [ap_id, content_id] : sc_.warm) {
    node::ApNode& ap = nodes_.at(ap_id);
    const node::ContentItem& item = content_of(content_id);
    for (std::uint32_t gen = 0; gen < item.generation_count(); ++gen) {
      node::CacheEntry& entry = ap.ensure_entry(item, gen, 0);
      auto sources = origin_.generation_sources(content_id, gen);
      for (int j = 0; j < item.generation_size && !entry.buf.decodable(); ++j) {
        coding::CodedPiece piece;
        piece.content_id = content_id;
        piece.generation_id = gen;
        piece.coeffs.assign(item.generation_size, 0);
        piece.coeffs[j] = 1;
        piece.payload = sources[j].payload;
        ap.absorb(item, piece, 0);
      }
    }
  }
}

const node::ContentItem& Engine::content_of(const std::string& id) const {
  const node::ContentItem* item = origin_.find(id);
  if (!item) throw std::logic_error("unknown content " + id);
  return *item;
}

void Engine::account_bytes(const FlowRec& flow, double bytes) {
  if (bytes <= 0) return;
  switch (flow.kind) {
    case FlowKind::CacheServe:
      metrics_.wireless_bytes += bytes;
      break;
    case FlowKind::FetchThrough:
      metrics_.wireless_bytes += bytes;
      metrics_.backhaul_bytes += bytes;
      break;
    case FlowKind::PrefetchOrigin:
      metrics_.backhaul_bytes += bytes;
      break;
    case FlowKind::LanShare:
      metrics_.lan_bytes += bytes;
      break;
  }
  if (flow.serves_vehicle()) {
    auto it = vehicles_.find(flow.vehicle);
    if (it != vehicles_.end()) {
      it->second.tally.total_delivered += bytes;
      if (flow.kind == FlowKind::CacheServe) it->second.tally.cache_delivered += bytes;
    }
  }
}

void Engine::advance_flow(FlowRec& flow, double now) {
  if (now <= flow.updated_at + kTimeEps) {
    flow.updated_at = std::max(flow.updated_at, now);
    return;
  }
  double start = flow.updated_at;
  flow.updated_at = now;
  if (flow.rate <= 0) return;

  double bytes = flow.rate * (now - start);
  if (bytes > flow.remaining()) bytes = flow.remaining();
  if (bytes <= 0) return;

  account_bytes(flow, bytes);
  double before = flow.delivered;
  flow.delivered += bytes;

  const node::ContentItem& item = content_of(flow.content_id);
  double piece_size = static_cast<double>(item.piece_size);
  while (flow.pieces_remaining() > 0 &&
         flow.delivered + kByteEps >= (flow.pieces_done + 1) * piece_size) {
    double boundary = (flow.pieces_done + 1) * piece_size;
    double at = start + (boundary - before) / flow.rate;
    at = std::clamp(at, start, now);
    ++flow.pieces_done;
    deliver_piece(flow, at);
  }
}

void Engine::deliver_piece(FlowRec& flow, double at) {
  const node::ContentItem& item = content_of(flow.content_id);

  if (flow.serves_vehicle()) {
    VehicleRec& v = vehicles_.at(flow.vehicle);
    if (!v.request || v.request->complete) {
      flow.sized_bytes = flow.delivered;  // nothing left to serve
      flow.pieces_total = flow.pieces_done;
      return;
    }
    RequestState& req = *v.request;

    // Largest rank deficit first, ties to the lowest generation id; skip to
    // the next candidate when the sender has nothing innovative for one.
    std::vector<std::pair<std::uint32_t, int>> deficits;
    for (auto& [gen, buf] : req.buffers)
      deficits.push_back({gen, item.generation_size - buf.rank()});

    while (auto picked = node::pick_serve_generation(deficits)) {
      std::uint32_t gen = *picked;
      for (auto& [g, d] : deficits)
        if (g == gen) d = 0;
      coding::GenerationBuffer& veh_buf = req.buffers.at(gen);
      coding::CodedPiece piece;
      if (flow.kind == FlowKind::FetchThrough) {
        piece = origin_.encode_for(flow.content_id, gen, veh_buf, coding_rng_);
        if (sc_.read_through) {
          node::ApNode& ap = nodes_.at(flow.ap);
          // pessimistic: entry creation cost even if eviction removes it first
          int padding = item.generation_size - item.pieces_in_generation(gen);
          std::uint64_t need = static_cast<std::uint64_t>(padding + 1) * item.piece_size;
          bool cached = ap.free_bytes() >= need;
          if (!cached) {
            auto evicted = ap.evict_for(need, at);
            if (evicted) {
              metrics_.evictions += evicted->size();
              for (const auto& key : *evicted) waste_entry(flow.ap, key, item.piece_size);
              cached = true;
            }
          }
          if (cached) ap.absorb(item, piece, at);
        }
      } else {
        node::ApNode& ap = nodes_.at(flow.ap);
        node::CacheEntry* entry = ap.find({flow.content_id, gen});
        if (!entry || coding::innovative_capacity(entry->buf, veh_buf) < 1) continue;
        piece = coding::recode_innovative(entry->buf, veh_buf, coding_rng_);
        ap.touch({flow.content_id, gen}, at);
        credit_use(flow.ap, flow.content_id, gen, flow.vehicle);
      }

      bool innovative = veh_buf.absorb(piece);
      if (!innovative) {
        ++metrics_.duplicate_pieces;
        return;
      }
      req.bytes_received += item.piece_size;
      if (veh_buf.decodable()) {
        --req.incomplete_generations;
        if (req.incomplete_generations == 0) {
          req.complete = true;
          req.completed_at = at;
          ++metrics_.requests_completed;
          completion_time_sum_ += at - req.issued_at;
        }
      }
      return;
    }
    // Nothing innovative left to send: end the flow early.
    flow.sized_bytes = flow.delivered;
    flow.pieces_total = flow.pieces_done;
    return;
  }

  // Prefetch piece into an AP cache. The sender codes against the union of
  // the AP's rows and the vehicle's reported rows (freshest feedback), so a
  // piece is only non-innovative when that feedback went stale in flight.
  node::ApNode& ap = nodes_.at(flow.ap);
  if (flow.queue.empty()) return;
  std::uint32_t gen = flow.queue.front().generation_id;
  if (--flow.queue.front().pieces == 0) flow.queue.pop_front();

  std::uint64_t release = std::min<std::uint64_t>(item.piece_size, flow.reserved_remaining);
  ap.release_reservation(release);
  flow.reserved_remaining -= release;

  coding::CoeffRows feedback = union_rows(flow.ap, flow.content_id, gen, flow.vehicle);
  bool union_full = coding::span_rank(item.generation_size, feedback) >= item.generation_size;

  coding::CodedPiece piece;
  bool have_piece = false;
  if (!union_full) {
    if (flow.kind == FlowKind::PrefetchOrigin) {
      piece = origin_.encode_for(flow.content_id, gen, feedback, coding_rng_);
      have_piece = true;
    } else {
      node::ApNode& peer = nodes_.at(flow.src_ap);
      node::CacheEntry* src = peer.find({flow.content_id, gen});
      // The peer may have evicted rows or lost its edge since the notice.
      if (src && coding::innovative_capacity(src->buf, feedback) >= 1) {
        piece = coding::recode_innovative(src->buf, feedback, coding_rng_);
        peer.touch({flow.content_id, gen}, at);
        have_piece = true;
      }
    }
  }

  bool innovative = have_piece && ap.absorb(item, piece, at);
  if (innovative) {
    ++credits_[{flow.ap, flow.content_id, gen, flow.vehicle}].stored;
  } else {
    ++metrics_.duplicate_pieces;
    metrics_.wasted_prefetch_bytes += static_cast<double>(item.piece_size);
  }

  // A vehicle waiting at this AP can use the new piece right away.
  for (auto& [vid, v] : vehicles_)
    if (v.at == flow.ap && v.request && !v.request->complete &&
        v.request->content_id == flow.content_id)
      pending_evals_.push_back(vid);
}

void Engine::schedule_flow_events(FlowRec& flow, double now) {
  ++flow.version;
  if (flow.remaining() <= kByteEps || flow.rate <= 0) return;
  bool piece_events =
      flow.kind == FlowKind::PrefetchOrigin || flow.kind == FlowKind::LanShare;
  Event ev;
  ev.flow_id = flow.id;
  ev.flow_version = flow.version;
  if (piece_events) {
    const node::ContentItem& item = content_of(flow.content_id);
    double boundary = (flow.pieces_done + 1) * static_cast<double>(item.piece_size);
    ev.kind = EventKind::PrefetchPieceArrive;
    ev.time_s = now + (boundary - flow.delivered) / flow.rate;
  } else {
    ev.kind = EventKind::FlowComplete;
    ev.time_s = now + flow.remaining() / flow.rate;
  }
  push_event(std::move(ev));
}

void Engine::reallocate(double now) {
  for (auto& [id, flow] : flows_) advance_flow(flow, now);

  std::vector<std::uint64_t> ids;
  std::vector<std::vector<int>> flow_links;
  for (auto& [id, flow] : flows_) {
    bool active = flow.remaining() > kByteEps && now + kTimeEps >= flow.gate_until;
    if (!active) {
      flow.rate = 0;
      ++flow.version;
      continue;
    }
    ids.push_back(id);
    flow_links.push_back(flow.links);
  }
  std::vector<double> rates = reallocate_rates(link_capacity_, flow_links);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    FlowRec& flow = flows_.at(ids[i]);
    flow.rate = rates[i];
    schedule_flow_events(flow, now);
  }
}

std::uint64_t Engine::spawn_flow(FlowRec flow, double now) {
  flow.id = next_flow_id_++;
  flow.updated_at = now;
  std::uint64_t id = flow.id;
  if (flow.gate_until > now + kTimeEps) {
    Event gate;
    gate.kind = EventKind::FlowReallocate;
    gate.time_s = flow.gate_until;
    push_event(std::move(gate));
  }
  flows_.emplace(id, std::move(flow));
  flows_dirty_ = true;
  return id;
}

void Engine::remove_flow(std::uint64_t id) {
  auto it = flows_.find(id);
  if (it == flows_.end()) return;
  FlowRec& flow = it->second;
  if (flow.reserved_remaining > 0)
    nodes_.at(flow.ap).release_reservation(flow.reserved_remaining);
  if (flow.serves_vehicle()) {
    VehicleRec& v = vehicles_.at(flow.vehicle);
    if (v.cache_flow == id) v.cache_flow = 0;
    if (v.fetch_flow == id) v.fetch_flow = 0;
  }
  flows_.erase(it);
  flows_dirty_ = true;
}

void Engine::drain_side_effects(double now) {
  while (!pending_evals_.empty() || flows_dirty_) {
    std::vector<std::string> evals = std::move(pending_evals_);
    pending_evals_.clear();
    for (const std::string& vid : evals) {
      auto it = vehicles_.find(vid);
      if (it != vehicles_.end()) evaluate_serving(it->second, now);
    }
    if (flows_dirty_) {
      flows_dirty_ = false;
      reallocate(now);
    }
  }
}

void Engine::evaluate_serving(VehicleRec& v, double now) {
  if (!v.at || !v.request || v.request->complete) return;
  RequestState& req = *v.request;
  const node::ContentItem& item = content_of(req.content_id);
  node::ApNode& ap = nodes_.at(*v.at);

  int deficit_pieces = 0;
  for (const auto& [gen, buf] : req.buffers)
    deficit_pieces += item.generation_size - buf.rank();

  int inflight_pieces = 0;
  if (v.cache_flow) inflight_pieces += flows_.at(v.cache_flow).pieces_remaining();
  if (v.fetch_flow) inflight_pieces += flows_.at(v.fetch_flow).pieces_remaining();

  int available = deficit_pieces - inflight_pieces;
  if (available <= 0 && v.tally.supply_snapshot >= 0) return;

  int supply_pieces = 0;
  if (!v.cache_flow) {
    for (const auto& [gen, buf] : req.buffers) {
      if (buf.decodable()) continue;
      const node::CacheEntry* entry = ap.find({req.content_id, gen});
      if (entry) supply_pieces += coding::innovative_capacity(entry->buf, buf);
    }
    if (v.tally.supply_snapshot < 0)
      v.tally.supply_snapshot = static_cast<double>(supply_pieces) * item.piece_size;
  }

  if (available <= 0) return;

  if (!v.cache_flow && supply_pieces > 0) {
    int pieces = std::min(supply_pieces, available);
    FlowRec flow;
    flow.kind = FlowKind::CacheServe;
    flow.links = {wireless_link(*v.at)};
    flow.sized_bytes = static_cast<double>(pieces) * item.piece_size;
    flow.pieces_total = pieces;
    flow.vehicle = v.id;
    flow.ap = *v.at;
    flow.content_id = req.content_id;
    flow.pre_contact = true;
    v.cache_flow = spawn_flow(std::move(flow), now);
    available -= pieces;
  }

  if (available > 0 && !v.fetch_flow) {
    FlowRec flow;
    flow.kind = FlowKind::FetchThrough;
    flow.links = {backhaul_link(*v.at), wireless_link(*v.at)};
    flow.sized_bytes = static_cast<double>(available) * item.piece_size;
    flow.pieces_total = available;
    flow.vehicle = v.id;
    flow.ap = *v.at;
    flow.content_id = req.content_id;
    flow.gate_until = now + origin_.response_latency_s();
    v.fetch_flow = spawn_flow(std::move(flow), now);
  }
}

void Engine::plan_prefetch(VehicleRec& v, const map::ApId& ap_id, double now) {
  if (!sc_.strategy || !v.request || v.request->complete) return;
  RequestState& req = *v.request;
  const node::ContentItem& item = content_of(req.content_id);

  std::vector<planner::GenerationNeed> needed;
  std::uint64_t deficit_bytes = 0;
  for (const auto& [gen, buf] : req.buffers) {
    int deficit = item.generation_size - buf.rank();
    if (deficit > 0) {
      needed.push_back({gen, deficit});
      deficit_bytes += static_cast<std::uint64_t>(deficit) * item.piece_size;
    }
  }
  std::uint64_t shortfall = planner::forecast_shortfall(deficit_bytes, 0, 0);
  if (shortfall == 0) return;

  const map::ContactGraph& graph = sc_.planner_graph ? *sc_.planner_graph : sc_.graph;
  if (!graph.aps().contains(ap_id)) return;
  map::TreeOptions options{sc_.prune_epsilon, sc_.branching_cap};
  map::LookaheadTree tree = map::build_lookahead_tree(graph, ap_id, sc_.k, options);
  if (tree.root_only()) return;

  std::vector<planner::BufferView> views;
  for (const map::ApId& ap : tree.lookahead_aps()) {
    auto it = nodes_.find(ap);
    if (it == nodes_.end()) continue;
    for (const auto& need : needed) {
      const node::CacheEntry* entry = it->second.find({req.content_id, need.generation_id});
      if (entry)
        views.push_back({ap, req.content_id, need.generation_id, entry->buf.rank(),
                         item.generation_size, tree.best_path_prob(ap)});
    }
  }

  planner::ContentShape shape{req.content_id, item.piece_size, item.generation_size};
  planner::TravelModel travel{sc_.mobility.travel_s.mean(), sc_.mobility.dwell_s.mean()};
  planner::PrefetchPlan plan;
  try {
    plan = planner::make_plan(v.id, shape, tree, *sc_.strategy, shortfall, needed, views,
                              travel, now, sc_.planner_options);
  } catch (const planner::NoPrediction&) {
    return;
  }

  double delay = sc_.notice_latency_s;
  if (sc_.map_mode == MapMode::Distributed) delay += sc_.k * sc_.map_query_rtt_s;
  for (const auto& target : plan.targets) {
    notices_.push_back({target.ap, v.id, req.content_id, target.assignments});
    ++metrics_.notices_sent;
    Event ev;
    ev.kind = EventKind::NoticeDeliver;
    ev.time_s = now + delay;
    ev.notice_index = notices_.size() - 1;
    push_event(std::move(ev));
  }
}

coding::CoeffRows Engine::union_rows(const map::ApId& ap, const std::string& content_id,
                                     std::uint32_t gen, const std::string& vehicle) const {
  coding::CoeffRows rows;
  auto node_it = nodes_.find(ap);
  if (node_it != nodes_.end())
    if (const node::CacheEntry* entry = node_it->second.find({content_id, gen}))
      for (const auto& row : entry->buf.rows()) rows.push_back(row.coeffs);
  auto veh_it = vehicles_.find(vehicle);
  if (veh_it != vehicles_.end() && veh_it->second.request &&
      veh_it->second.request->content_id == content_id) {
    auto buf_it = veh_it->second.request->buffers.find(gen);
    if (buf_it != veh_it->second.request->buffers.end())
      for (const auto& row : buf_it->second.rows()) rows.push_back(row.coeffs);
  }
  return rows;
}

void Engine::credit_use(const map::ApId& ap, const std::string& content, std::uint32_t gen,
                        const std::string& vehicle) {
  auto it = credits_.find({ap, content, gen, vehicle});
  if (it != credits_.end() && it->second.used < it->second.stored) ++it->second.used;
}

void Engine::waste_entry(const map::ApId& ap, const node::CacheKey& key,
                         std::size_t piece_size) {
  auto it = credits_.lower_bound({ap, key.content_id, key.generation_id, ""});
  while (it != credits_.end() && it->first.ap == ap && it->first.content_id == key.content_id &&
         it->first.generation_id == key.generation_id) {
    metrics_.wasted_prefetch_bytes +=
        static_cast<double>(it->second.stored - it->second.used) * piece_size;
    it = credits_.erase(it);
  }
}

void Engine::on_arrive(const Event& ev) {
  VehicleRec& v = vehicles_.at(ev.vehicle);
  v.at = ev.ap;
  v.contact_start = ev.time_s;
  v.tally = ContactTally{};
  ++metrics_.contacts;

  if (!v.requested) {
    v.requested = true;
    Event req;
    req.kind = EventKind::RequestIssued;
    req.time_s = ev.time_s;
    req.vehicle = ev.vehicle;
    push_event(std::move(req));
    return;
  }
  if (v.request && !v.request->complete) {
    ++v.request->contact_number;
    evaluate_serving(v, ev.time_s);
  }
}

void Engine::on_request_issued(const Event& ev) {
  VehicleRec& v = vehicles_.at(ev.vehicle);
  auto it = workload_content_.find(ev.vehicle);
  if (it == workload_content_.end()) return;  // vehicle outside the workload
  const std::string& content_id = it->second;
  if (!origin_.find(content_id)) {
    ++metrics_.rejected_requests;
    return;
  }
  const node::ContentItem& item = content_of(content_id);

  RequestState req;
  req.content_id = content_id;
  req.issued_at = ev.time_s;
  req.contact_number = v.at ? 1 : 0;
  for (std::uint32_t gen = 0; gen < item.generation_count(); ++gen) {
    auto buf = node::make_buffer(item, gen);
    if (!buf.decodable()) ++req.incomplete_generations;
    req.buffers.emplace(gen, std::move(buf));
  }
  ++metrics_.requests_issued;
  if (req.incomplete_generations == 0) {
    // Degenerate content that is pure padding; complete immediately.
    req.complete = true;
    req.completed_at = ev.time_s;
    ++metrics_.requests_completed;
  }
  v.request = std::move(req);
  evaluate_serving(v, ev.time_s);
}

void Engine::flush_contact(VehicleRec& v, double now) {
  if (!v.at) return;
  double snapshot = std::max(0.0, v.tally.supply_snapshot);
  double hit = std::min(v.tally.cache_delivered, snapshot);
  metrics_.cache_hit_bytes += hit;
  metrics_.total_vehicle_bytes += v.tally.total_delivered;
  if (v.tally.total_delivered > 0) ++metrics_.serving_contacts;
  if (v.request && v.request->contact_number >= 2) {
    metrics_.post_first_hit_bytes += hit;
    metrics_.post_first_total_bytes += v.tally.total_delivered;
  }
  v.history.push_back({*v.at, v.contact_start, now});
  v.tally = ContactTally{};
}

void Engine::on_depart(const Event& ev) {
  VehicleRec& v = vehicles_.at(ev.vehicle);
  if (v.at != ev.ap) return;  // stale: contact already ended

  // Settle and terminate the vehicle's flows before planning.
  if (v.cache_flow) advance_flow(flows_.at(v.cache_flow), ev.time_s);
  if (v.fetch_flow) advance_flow(flows_.at(v.fetch_flow), ev.time_s);
  remove_flow(v.cache_flow);
  remove_flow(v.fetch_flow);

  flush_contact(v, ev.time_s);

  if (v.request && !v.request->complete) plan_prefetch(v, ev.ap, ev.time_s);

  nodes_.at(ev.ap).release_pins(v.id);
  v.at.reset();
}

void Engine::on_notice(const Event& ev) {
  const Notice& notice = notices_.at(ev.notice_index);
  node::ApNode& ap = nodes_.at(notice.target);
  const node::ContentItem& item = content_of(notice.content_id);

  struct LanGroup {
    map::ApId peer;
    std::deque<planner::Assignment> queue;
    std::uint64_t bytes = 0;
  };
  std::deque<planner::Assignment> origin_queue;
  std::uint64_t origin_bytes = 0;
  std::map<map::ApId, LanGroup> lan_groups;
  std::uint64_t entry_bytes = 0;

  for (const auto& assignment : notice.assignments) {
    node::CacheKey key{notice.content_id, assignment.generation_id};
    // A missing entry starts at the padding rank once created.
    int own = ap.find(key)
                  ? ap.rank_of(key)
                  : item.generation_size - item.pieces_in_generation(assignment.generation_id);
    int take = std::min(assignment.pieces, item.generation_size - own);
    if (take <= 0) continue;

    // Senders code against the vehicle's reported rows too, so only pieces
    // that extend the combined span are worth fetching.
    coding::CoeffRows feedback =
        union_rows(notice.target, notice.content_id, assignment.generation_id, notice.vehicle);
    // padding rows of a missing entry are part of the span once created
    if (!ap.find(key)) {
      for (int j = item.pieces_in_generation(assignment.generation_id);
           j < item.generation_size; ++j) {
        std::vector<std::uint8_t> pad(item.generation_size, 0);
        pad[j] = 1;
        feedback.push_back(std::move(pad));
      }
    }
    int union_rank = coding::span_rank(item.generation_size, feedback);
    take = std::min(take, item.generation_size - union_rank);
    if (take <= 0) continue;

    // Highest-rank LAN peer above our own rank, ties to the smallest id.
    const map::ApId* best_peer = nullptr;
    int best_rank = own;
    for (const auto& [peer_id, peer] : nodes_) {
      if (peer_id == notice.target) continue;
      int rank = peer.rank_of(key);
      if (rank > best_rank) {
        best_rank = rank;
        best_peer = &peer_id;
      }
    }

    int lan_pieces = 0;
    if (best_peer) {
      const node::CacheEntry* peer_entry = nodes_.at(*best_peer).find(key);
      lan_pieces = std::min(take, coding::innovative_capacity(peer_entry->buf, feedback));
    }

    entry_bytes += ap.entry_create_cost(item, assignment.generation_id);
    if (lan_pieces > 0) {
      LanGroup& group = lan_groups[*best_peer];
      group.peer = *best_peer;
      group.queue.push_back({assignment.generation_id, lan_pieces});
      group.bytes += static_cast<std::uint64_t>(lan_pieces) * item.piece_size;
    }
    // what the best peer cannot supply comes from the origin
    if (take > lan_pieces) {
      origin_queue.push_back({assignment.generation_id, take - lan_pieces});
      origin_bytes += static_cast<std::uint64_t>(take - lan_pieces) * item.piece_size;
    }
  }

  std::uint64_t piece_bytes = origin_bytes;
  for (const auto& [peer, group] : lan_groups) piece_bytes += group.bytes;
  if (piece_bytes == 0) return;

  auto evicted = ap.evict_for(piece_bytes + entry_bytes, ev.time_s);
  if (!evicted) {
    ++metrics_.declined_prefetches;
    return;
  }
  metrics_.evictions += evicted->size();
  for (const auto& key : *evicted) waste_entry(notice.target, key, item.piece_size);

  auto pin_gens = [&](const std::deque<planner::Assignment>& queue) {
    for (const auto& a : queue) {
      ap.ensure_entry(item, a.generation_id, ev.time_s);
      node::CacheKey key{notice.content_id, a.generation_id};
      ap.pin(key, notice.vehicle, ev.time_s + sc_.pin_timeout_s);
      ap.touch(key, ev.time_s);
    }
  };
  pin_gens(origin_queue);
  for (const auto& [peer, group] : lan_groups) pin_gens(group.queue);
  ap.reserve(piece_bytes);

  if (!origin_queue.empty()) {
    FlowRec flow;
    flow.kind = FlowKind::PrefetchOrigin;
    flow.links = {backhaul_link(notice.target)};
    flow.sized_bytes = static_cast<double>(origin_bytes);
    flow.pieces_total = static_cast<int>(origin_bytes / item.piece_size);
    flow.vehicle = notice.vehicle;
    flow.ap = notice.target;
    flow.content_id = notice.content_id;
    flow.queue = origin_queue;
    flow.reserved_remaining = origin_bytes;
    flow.gate_until = ev.time_s + origin_.response_latency_s();
    spawn_flow(std::move(flow), ev.time_s);
  }
  for (auto& [peer, group] : lan_groups) {
    FlowRec flow;
    flow.kind = FlowKind::LanShare;
    flow.links = {lan_port(peer), lan_port(notice.target)};
    flow.sized_bytes = static_cast<double>(group.bytes);
    flow.pieces_total = static_cast<int>(group.bytes / item.piece_size);
    flow.vehicle = notice.vehicle;
    flow.ap = notice.target;
    flow.src_ap = peer;
    flow.content_id = notice.content_id;
    flow.queue = std::move(group.queue);
    flow.reserved_remaining = group.bytes;
    spawn_flow(std::move(flow), ev.time_s);
  }
}

void Engine::on_flow_complete(const Event& ev) {
  auto it = flows_.find(ev.flow_id);
  if (it == flows_.end() || it->second.version != ev.flow_version) return;
  advance_flow(it->second, ev.time_s);
  if (it->second.remaining() > kByteEps) {
    schedule_flow_events(it->second, ev.time_s);  // ended early or rescheduled
    return;
  }
  remove_flow(ev.flow_id);
}

void Engine::on_piece_event(const Event& ev) {
  auto it = flows_.find(ev.flow_id);
  if (it == flows_.end() || it->second.version != ev.flow_version) return;
  FlowRec& flow = it->second;
  advance_flow(flow, ev.time_s);
  if (flow.remaining() <= kByteEps) {
    Event done;
    done.kind = EventKind::FlowComplete;
    done.time_s = ev.time_s;
    done.flow_id = flow.id;
    done.flow_version = ++flow.version;
    push_event(std::move(done));
    return;
  }
  schedule_flow_events(flow, ev.time_s);
}

void Engine::check_invariants(double now) const {
  for (const auto& [id, ap] : nodes_) {
    std::uint64_t rows = 0;
    for (const auto& [key, entry] : ap.cache())
      rows += static_cast<std::uint64_t>(entry.buf.rank()) * entry.buf.piece_size();
    if (rows != ap.used_bytes()) throw std::logic_error("storage accounting drift at " + id);
    if (ap.used_bytes() + ap.reserved_bytes() > ap.capacity_bytes())
      throw std::logic_error("storage over capacity at " + id);
  }
  std::vector<double> load(link_capacity_.size(), 0);
  for (const auto& [id, flow] : flows_)
    if (flow.rate > 0)
      for (int l : flow.links) load[l] += flow.rate;
  for (std::size_t l = 0; l < load.size(); ++l)
    if (load[l] > link_capacity_[l] * (1 + 1e-9))
      throw std::logic_error("link overcommitted");
  (void)now;
}

void Engine::finalize(MetricsReport& report) {
  // Flush any contacts still open at the end of the run.
  for (auto& [id, v] : vehicles_) flush_contact(v, sc_.duration_s);

  // Prefetched rows never served to their vehicle are wasted.
  for (const auto& [key, credit] : credits_) {
    const node::ContentItem& item = content_of(key.content_id);
    metrics_.wasted_prefetch_bytes +=
        static_cast<double>(credit.stored - credit.used) * item.piece_size;
  }

  report = metrics_;
  report.no_requests = metrics_.requests_issued == 0;
  report.completion_fraction =
      report.no_requests ? 0
                         : static_cast<double>(metrics_.requests_completed) /
                               static_cast<double>(metrics_.requests_issued);
  report.mean_completion_s = metrics_.requests_completed == 0
                                 ? 0
                                 : completion_time_sum_ / metrics_.requests_completed;
  report.cache_hit_bytes_ratio = metrics_.total_vehicle_bytes <= 0
                                     ? 0
                                     : metrics_.cache_hit_bytes / metrics_.total_vehicle_bytes;
}

MetricsReport Engine::run() {
  setup_nodes();
  setup_contents();
  setup_workload();
  setup_contacts();
  warm_caches();

  while (!queue_.empty()) {
    Event ev = queue_.top();
    queue_.pop();
    if (ev.time_s > sc_.duration_s + kTimeEps) break;

    switch (ev.kind) {
      case EventKind::VehicleArrive: on_arrive(ev); break;
      case EventKind::VehicleDepart: on_depart(ev); break;
      case EventKind::RequestIssued: on_request_issued(ev); break;
      case EventKind::NoticeDeliver: on_notice(ev); break;
      case EventKind::FlowComplete: on_flow_complete(ev); break;
      case EventKind::PrefetchPieceArrive: on_piece_event(ev); break;
      case EventKind::FlowReallocate: flows_dirty_ = true; break;
    }
    drain_side_effects(ev.time_s);
    if (sc_.paranoid_checks) check_invariants(ev.time_s);
  }

  for (auto& [id, flow] : flows_) advance_flow(flow, sc_.duration_s);

  MetricsReport report;
  finalize(report);
  return report;
}

}  // namespace

MetricsReport run(const Scenario& scenario) {
  auto errors = scenario.validate();
  if (!errors.empty()) throw std::invalid_argument("invalid scenario: " + errors.front());
  Engine engine(scenario);
  return engine.run();
}

}  // namespace roadcast::sim
