#include "roadcast/lookahead.hpp"

#include <algorithm>

namespace roadcast::map {

std::vector<ApId> LookaheadTree::lookahead_aps() const {
  std::vector<ApId> out;
  std::set<ApId> seen;
  for (int i = 1; i < size(); ++i)
    if (seen.insert(nodes_[i].ap).second) out.push_back(nodes_[i].ap);
  return out;
}

double LookaheadTree::best_path_prob(const ApId& ap) const {
  double best = 0.0;
  for (int i = 1; i < size(); ++i)
    if (nodes_[i].ap == ap) best = std::max(best, nodes_[i].path_prob);
  return best;
}

int LookaheadTree::best_depth(const ApId& ap) const {
  double best = -1.0;
  int depth = 0;
  for (int i = 1; i < size(); ++i)
    if (nodes_[i].ap == ap && nodes_[i].path_prob > best) {
      best = nodes_[i].path_prob;
      depth = nodes_[i].depth;
    }
  return depth;
}

std::vector<ApId> LookaheadTree::path_to(int node_index) const {
  std::vector<ApId> path;
  for (int i = node_index; i > 0; i = nodes_[i].parent) path.push_back(nodes_[i].ap);
  std::reverse(path.begin(), path.end());
  return path;
}

LookaheadTree build_lookahead_tree(const ContactGraph& graph, const ApId& root, int k,
                                   const TreeOptions& options) {
  if (!graph.aps().contains(root))
    throw std::invalid_argument("build_lookahead_tree: unknown root AP " + root);
  if (k < 0) throw std::invalid_argument("build_lookahead_tree: negative depth");

  std::vector<TreeNode> nodes;
  nodes.push_back(TreeNode{root, 0, -1, 1.0, 1.0, {}});

  for (int i = 0; i < static_cast<int>(nodes.size()); ++i) {
    if (nodes[i].depth >= k) continue;
    auto successors = graph.row(nodes[i].ap);
    // Highest probability first; sorted order from row() breaks ties by ApId.
    std::stable_sort(successors.begin(), successors.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    if (options.branching_cap > 0 &&
        successors.size() > static_cast<std::size_t>(options.branching_cap))
      successors.resize(options.branching_cap);
    for (const auto& [ap, prob] : successors) {
      double path_prob = nodes[i].path_prob * prob;
      if (prob <= 0.0 || path_prob < options.prune_epsilon) continue;
      nodes.push_back(TreeNode{ap, nodes[i].depth + 1, i, prob, path_prob, {}});
      nodes[i].children.push_back(static_cast<int>(nodes.size()) - 1);
    }
  }
  return LookaheadTree(std::move(nodes), k);
}

std::vector<ApId> most_probable_sequence(const LookaheadTree& tree) {
  int best = -1;
  std::vector<ApId> best_path;
  for (int i = 1; i < tree.size(); ++i) {
    const TreeNode& n = tree.node(i);
    if (best >= 0) {
      const TreeNode& b = tree.node(best);
      if (n.depth < b.depth) continue;
      if (n.depth == b.depth && n.path_prob < b.path_prob) continue;
      if (n.depth == b.depth && n.path_prob == b.path_prob) {
        auto path = tree.path_to(i);
        if (!std::lexicographical_compare(path.begin(), path.end(), best_path.begin(),
                                          best_path.end()))
          continue;
        best = i;
        best_path = std::move(path);
        continue;
      }
    }
    best = i;
    best_path = tree.path_to(i);
  }
  return best_path;
}

namespace {

double hit_below(const LookaheadTree& tree, int index, const std::set<ApId>& selected) {
  double h = 0.0;
  for (int child : tree.node(index).children) {
    const TreeNode& c = tree.node(child);
    double hc = selected.contains(c.ap) ? 1.0 : hit_below(tree, child, selected);
    h += c.edge_prob * hc;
  }
  return h;
}

}  // namespace

double hit_probability(const LookaheadTree& tree, const std::set<ApId>& selected) {
  return hit_below(tree, 0, selected);
}

}  // namespace roadcast::map
