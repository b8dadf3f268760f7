#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "roadcast/lookahead.hpp"

namespace roadcast::planner {

using map::ApId;
using map::LookaheadTree;

enum class StrategyKind { AllLookahead, MostProbablePath, Representative };

// Resource limits for the representative selection. At least one limit
// must be set.
struct SelectionBudget {
  std::optional<std::uint64_t> max_total_prefetch_bytes;
  std::optional<int> max_aps;
  std::optional<double> target_hit_prob;  // in (0, 1]

  bool any_limit() const {
    return max_total_prefetch_bytes.has_value() || max_aps.has_value() ||
           target_hit_prob.has_value();
  }
};

struct Strategy {
  StrategyKind kind = StrategyKind::AllLookahead;
  SelectionBudget budget;  // used by Representative only

  static Strategy all() { return {StrategyKind::AllLookahead, {}}; }
  static Strategy mpp() { return {StrategyKind::MostProbablePath, {}}; }
  static Strategy representative(SelectionBudget b) {
    return {StrategyKind::Representative, b};
  }
};

struct NoPrediction : std::runtime_error {
  NoPrediction() : std::runtime_error("no prediction") {}
};

// Bytes that will remain undelivered when the contact ends; a positive
// result triggers prefetching.
std::uint64_t forecast_shortfall(std::uint64_t remaining_bytes, double effective_rate_Bps,
                                 double remaining_contact_s);

// Ordered selection of prefetch targets from the lookahead tree.
// Throws NoPrediction on a root-only tree.
std::vector<ApId> select_aps(const LookaheadTree& tree, const Strategy& strategy,
                             std::uint64_t per_ap_cost_bytes);

// Seeds with the most probable path, then greedily adds the AP with the
// largest marginal hit-probability gain (ties: larger path probability,
// then smaller ApId) while the budget holds and the target, if any, is
// unmet. If the budget cannot cover the seed, the path is truncated to fit.
std::vector<ApId> greedy_representative(const LookaheadTree& tree, const SelectionBudget& budget,
                                        std::uint64_t per_ap_cost_bytes);

// A neighbor AP's stored state for one generation.
struct BufferView {
  ApId owner;
  std::string content_id;
  std::uint32_t generation_id = 0;
  int rank = 0;
  int generation_size = 0;
  double weight = 1.0;  // contact probability, used only by the weighted variant
};

// Sum of neighbor ranks for one generation; absent buffers count zero.
int rank_sum(const std::string& content_id, std::uint32_t generation_id,
             std::span<const BufferView> neighbor_states);

// Contact-probability weighted variant (off by default in the pipeline).
double weighted_rank_sum(const std::string& content_id, std::uint32_t generation_id,
                         std::span<const BufferView> neighbor_states);

struct GenerationNeed {
  std::uint32_t generation_id = 0;
  int pieces_needed = 0;
};

struct Assignment {
  std::uint32_t generation_id = 0;
  int pieces = 0;
};

enum class QuotaMode { Full, Split };

struct PlannerOptions {
  bool weighted_rank_sum = false;
  QuotaMode quota_mode = QuotaMode::Full;
};

// Orders needed generations by ascending rank-sum over the other selected
// APs (ties: ascending generation id) and fills the quota generation by
// generation, capping each at g minus the target's current rank.
std::vector<Assignment> assign_pieces(std::span<const GenerationNeed> needed, const ApId& target,
                                      std::span<const BufferView> states, int quota_pieces,
                                      const PlannerOptions& options = {});

struct PlanTarget {
  ApId ap;
  std::vector<Assignment> assignments;
  double estimated_arrival_s = 0;
};

struct PrefetchPlan {
  std::string vehicle;
  std::string content_id;
  std::vector<GenerationNeed> needed_generations;
  std::vector<PlanTarget> targets;
  double created_at_s = 0;
};

struct ContentShape {
  std::string content_id;
  std::size_t piece_size = 4096;
  int generation_size = 16;
};

// Mean hop timings used for per-target arrival estimates.
struct TravelModel {
  double travel_mean_s = 0;
  double dwell_mean_s = 0;
};

// Full pipeline: target selection, per-target piece assignment sized to the
// shortfall, and arrival estimates along each target's tree path.
PrefetchPlan make_plan(const std::string& vehicle, const ContentShape& content,
                       const LookaheadTree& tree, const Strategy& strategy,
                       std::uint64_t shortfall_bytes, std::span<const GenerationNeed> needed,
                       std::span<const BufferView> states, const TravelModel& travel,
                       double created_at_s, const PlannerOptions& options = {});

// Human-readable dump: tree with path probabilities, strategy, selection,
// and per-target assignments.
std::string format_plan(const LookaheadTree& tree, const Strategy& strategy,
                        const PrefetchPlan* plan);

std::string strategy_name(const Strategy& strategy);

}  // namespace roadcast::planner
