#pragma once

#include <set>
#include <vector>

#include "roadcast/contact_map.hpp"

namespace roadcast::map {

struct TreeOptions {
  // Nodes whose root-to-node probability falls below this are dropped.
  double prune_epsilon = 0.01;
  // Highest-probability successors kept per node; 0 means unlimited.
  int branching_cap = 8;
};

struct TreeNode {
  ApId ap;
  int depth = 0;
  int parent = -1;
  double edge_prob = 1.0;
  double path_prob = 1.0;
  std::vector<int> children;
};

// Unrolled k-hop expansion of the contact graph from a serving AP. The tree
// is over contact sequences, so the same AP may appear in several nodes.
class LookaheadTree {
 public:
  LookaheadTree(std::vector<TreeNode> nodes, int k) : nodes_(std::move(nodes)), k_(k) {}

  const TreeNode& node(int i) const { return nodes_[i]; }
  const TreeNode& root() const { return nodes_[0]; }
  int size() const { return static_cast<int>(nodes_.size()); }
  int k() const { return k_; }
  bool root_only() const { return nodes_.size() == 1; }

  // Distinct APs excluding the root, in breadth-first encounter order.
  std::vector<ApId> lookahead_aps() const;

  // Highest path probability over the nodes carrying this AP; 0 if absent.
  double best_path_prob(const ApId& ap) const;

  // Depth of the highest-probability node carrying this AP; 0 if absent.
  int best_depth(const ApId& ap) const;

  // Root-to-node AP sequence, root excluded.
  std::vector<ApId> path_to(int node_index) const;

 private:
  std::vector<TreeNode> nodes_;  // breadth-first order, nodes_[0] is the root
  int k_ = 0;
};

// Breadth-first expansion to depth k following the graph's derived
// probabilities. Children below prune_epsilon (path probability) or beyond
// the branching cap are omitted; APs with no observed successors are leaves.
LookaheadTree build_lookahead_tree(const ContactGraph& graph, const ApId& root, int k,
                                   const TreeOptions& options = {});

// Deepest path available, highest path probability among those, ties broken
// by the lexicographically smallest AP sequence. Empty for a root-only tree.
std::vector<ApId> most_probable_sequence(const LookaheadTree& tree);

// Probability that the next-k contact path visits any AP in `selected`,
// with pruned probability mass contributing zero.
double hit_probability(const LookaheadTree& tree, const std::set<ApId>& selected);

}  // namespace roadcast::map
