#include "roadcast/planner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace roadcast::planner {

std::uint64_t forecast_shortfall(std::uint64_t remaining_bytes, double effective_rate_Bps,
                                 double remaining_contact_s) {
  if (effective_rate_Bps < 0 || remaining_contact_s < 0)
    throw std::invalid_argument("forecast_shortfall: negative input");
  double deliverable = effective_rate_Bps * remaining_contact_s;
  if (deliverable >= static_cast<double>(remaining_bytes)) return 0;
  return remaining_bytes - static_cast<std::uint64_t>(deliverable);
}

namespace {

std::vector<ApId> dedupe(const std::vector<ApId>& seq) {
  std::vector<ApId> out;
  std::set<ApId> seen;
  for (const ApId& ap : seq)
    if (seen.insert(ap).second) out.push_back(ap);
  return out;
}

}  // namespace

std::vector<ApId> greedy_representative(const LookaheadTree& tree, const SelectionBudget& budget,
                                        std::uint64_t per_ap_cost_bytes) {
  if (!budget.any_limit())
    throw std::invalid_argument("greedy_representative: budget has no limit set");
  if (per_ap_cost_bytes == 0)
    throw std::invalid_argument("greedy_representative: per-AP cost must be positive");

  std::size_t cap = std::numeric_limits<std::size_t>::max();
  if (budget.max_aps) cap = std::min<std::size_t>(cap, std::max(0, *budget.max_aps));
  if (budget.max_total_prefetch_bytes)
    cap = std::min<std::size_t>(cap, *budget.max_total_prefetch_bytes / per_ap_cost_bytes);

  std::vector<ApId> selected = dedupe(most_probable_sequence(tree));
  if (selected.size() > cap) selected.resize(cap);  // budget below the seed path: truncate

  std::set<ApId> chosen(selected.begin(), selected.end());
  std::vector<ApId> candidates;
  for (const ApId& ap : tree.lookahead_aps())
    if (!chosen.contains(ap)) candidates.push_back(ap);

  double hit = hit_probability(tree, chosen);
  while (!candidates.empty() && selected.size() < cap) {
    if (budget.target_hit_prob && hit >= *budget.target_hit_prob - 1e-12) break;

    std::size_t best = 0;
    double best_gain = -1.0;
    double best_path_prob = -1.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      std::set<ApId> trial = chosen;
      trial.insert(candidates[i]);
      double gain = hit_probability(tree, trial) - hit;
      double path_prob = tree.best_path_prob(candidates[i]);
      if (gain > best_gain + 1e-15 ||
          (gain > best_gain - 1e-15 &&
           (path_prob > best_path_prob + 1e-15 ||
            (path_prob > best_path_prob - 1e-15 && candidates[i] < candidates[best])))) {
        best = i;
        best_gain = gain;
        best_path_prob = path_prob;
      }
    }
    hit += best_gain;
    chosen.insert(candidates[best]);
    selected.push_back(candidates[best]);
    candidates.erase(candidates.begin() + best);
  }
  return selected;
}

std::vector<ApId> select_aps(const LookaheadTree& tree, const Strategy& strategy,
                             std::uint64_t per_ap_cost_bytes) {
  if (tree.root_only()) throw NoPrediction();
  switch (strategy.kind) {
    case StrategyKind::AllLookahead:
      return tree.lookahead_aps();
    case StrategyKind::MostProbablePath:
      return dedupe(most_probable_sequence(tree));
    case StrategyKind::Representative:
      return greedy_representative(tree, strategy.budget, per_ap_cost_bytes);
  }
  return {};
}

int rank_sum(const std::string& content_id, std::uint32_t generation_id,
             std::span<const BufferView> neighbor_states) {
  int sum = 0;
  for (const BufferView& view : neighbor_states)
    if (view.content_id == content_id && view.generation_id == generation_id) sum += view.rank;
  return sum;
}

double weighted_rank_sum(const std::string& content_id, std::uint32_t generation_id,
                         std::span<const BufferView> neighbor_states) {
  double sum = 0;
  for (const BufferView& view : neighbor_states)
    if (view.content_id == content_id && view.generation_id == generation_id)
      sum += view.weight * view.rank;
  return sum;
}

std::vector<Assignment> assign_pieces(std::span<const GenerationNeed> needed, const ApId& target,
                                      std::span<const BufferView> states, int quota_pieces,
                                      const PlannerOptions& options) {
  if (quota_pieces < 1) throw std::invalid_argument("assign_pieces: quota must be at least 1");

  std::vector<BufferView> neighbors;
  std::vector<BufferView> own;
  for (const BufferView& view : states)
    (view.owner == target ? own : neighbors).push_back(view);

  struct Scored {
    GenerationNeed need;
    double score;
  };
  // All views in one plan refer to the same content.
  std::string content_id = neighbors.empty() ? "" : neighbors.front().content_id;
  std::vector<Scored> order;
  order.reserve(needed.size());
  for (const GenerationNeed& need : needed) {
    double score = options.weighted_rank_sum
                       ? weighted_rank_sum(content_id, need.generation_id, neighbors)
                       : static_cast<double>(rank_sum(content_id, need.generation_id, neighbors));
    order.push_back({need, score});
  }
  std::stable_sort(order.begin(), order.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score < b.score;
    return a.need.generation_id < b.need.generation_id;
  });

  std::vector<Assignment> out;
  int quota_left = quota_pieces;
  for (const Scored& item : order) {
    if (quota_left <= 0) break;
    int target_rank = 0;
    int g = 0;
    for (const BufferView& view : own)
      if (view.generation_id == item.need.generation_id) {
        target_rank = view.rank;
        g = view.generation_size;
      }
    int cap = item.need.pieces_needed;
    if (g > 0) cap = std::min(cap, g - target_rank);
    int take = std::min(cap, quota_left);
    if (take <= 0) continue;
    out.push_back({item.need.generation_id, take});
    quota_left -= take;
  }
  return out;
}

PrefetchPlan make_plan(const std::string& vehicle, const ContentShape& content,
                       const LookaheadTree& tree, const Strategy& strategy,
                       std::uint64_t shortfall_bytes, std::span<const GenerationNeed> needed,
                       std::span<const BufferView> states, const TravelModel& travel,
                       double created_at_s, const PlannerOptions& options) {
  if (shortfall_bytes == 0) throw std::invalid_argument("make_plan: no shortfall");

  std::vector<ApId> targets = select_aps(tree, strategy, shortfall_bytes);
  if (targets.empty()) throw NoPrediction();

  int quota_total = static_cast<int>(
      (shortfall_bytes + content.piece_size - 1) / content.piece_size);

  double prob_sum = 0;
  for (const ApId& ap : targets) prob_sum += tree.best_path_prob(ap);

  std::set<ApId> target_set(targets.begin(), targets.end());

  PrefetchPlan plan;
  plan.vehicle = vehicle;
  plan.content_id = content.content_id;
  plan.needed_generations.assign(needed.begin(), needed.end());
  plan.created_at_s = created_at_s;

  for (const ApId& ap : targets) {
    int quota = quota_total;
    if (options.quota_mode == QuotaMode::Split && prob_sum > 0) {
      double share = tree.best_path_prob(ap) / prob_sum;
      quota = std::max(1, static_cast<int>(std::ceil(quota_total * share)));
    }

    // Neighbors for the rank-sum metric are the other APs selected in this plan.
    std::vector<BufferView> views;
    for (const BufferView& view : states)
      if (view.owner == ap || (target_set.contains(view.owner) && view.owner != ap))
        views.push_back(view);

    std::vector<Assignment> assignments = assign_pieces(needed, ap, views, quota, options);
    if (assignments.empty()) continue;

    int depth = tree.best_depth(ap);
    double eta = depth * travel.travel_mean_s + std::max(0, depth - 1) * travel.dwell_mean_s;
    plan.targets.push_back({ap, std::move(assignments), eta});
  }
  return plan;
}

std::string strategy_name(const Strategy& strategy) {
  switch (strategy.kind) {
    case StrategyKind::AllLookahead: return "all";
    case StrategyKind::MostProbablePath: return "mpp";
    case StrategyKind::Representative: return "representative";
  }
  return "?";
}

namespace {

void dump_node(const LookaheadTree& tree, int index, int indent, std::string& out) {
  const map::TreeNode& n = tree.node(index);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", n.path_prob);
  out.append(indent, ' ');
  out += n.ap;
  out += "  ";
  out += buf;
  out += '\n';
  for (int child : n.children) dump_node(tree, child, indent + 2, out);
}

}  // namespace

std::string format_plan(const LookaheadTree& tree, const Strategy& strategy,
                        const PrefetchPlan* plan) {
  std::string out;
  out += "strategy: " + strategy_name(strategy) + "\n";
  out += "tree:\n";
  dump_node(tree, 0, 2, out);

  std::vector<ApId> mpp = most_probable_sequence(tree);
  out += "mpp:";
  for (const ApId& ap : mpp) out += " " + ap;
  if (mpp.empty()) out += " (none)";
  out += '\n';

  if (!plan) {
    out += "no prediction\n";
    return out;
  }

  out += "selected:";
  for (const PlanTarget& t : plan->targets) out += " " + t.ap;
  out += '\n';
  out += "assignments:\n";
  for (const PlanTarget& t : plan->targets) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f", t.estimated_arrival_s);
    out += "  " + t.ap + " (eta " + buf + "s):";
    for (const Assignment& a : t.assignments) {
      char item[64];
      std::snprintf(item, sizeof item, " gen %u x%d", a.generation_id, a.pieces);
      out += item;
    }
    out += '\n';
  }
  return out;
}

}  // namespace roadcast::planner
