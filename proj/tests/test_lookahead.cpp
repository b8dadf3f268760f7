#include <doctest.h>

#include "oracles.hpp"
#include "roadcast/lookahead.hpp"
#include "roadcast/rng.hpp"

using namespace roadcast;
using map::ApId;
using map::ContactGraph;
using map::LookaheadTree;
using map::TreeOptions;

namespace {

// The worked two-hop example used across the planner tests:
// p(A->B)=0.6, p(A->C)=0.4, p(B->F)=0.7, p(B->G)=0.3, p(C->H)=1.0
ContactGraph example_graph() {
  ContactGraph g;
  g.add_count("A", "B", 6);
  g.add_count("A", "C", 4);
  g.add_count("B", "F", 7);
  g.add_count("B", "G", 3);
  g.add_count("C", "H", 5);
  return g;
}

TreeOptions no_pruning() { return {0.0, 0}; }

// Random graph plus the equivalent oracle matrix, built from one count set.
struct GraphPair {
  ContactGraph graph;
  oracle::Matrix matrix;
};

GraphPair random_graph_pair(Rng& rng, int max_aps) {
  int n = 2 + static_cast<int>(rng.below(max_aps - 1));
  std::vector<std::string> names;
  for (int i = 0; i < n; ++i) names.push_back("N" + std::to_string(i));

  GraphPair out;
  std::map<std::string, std::vector<std::pair<std::string, std::uint64_t>>> counts;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j || !rng.chance(0.45)) continue;
      counts[names[i]].push_back({names[j], 1 + rng.below(9)});
    }
    out.graph.add_ap(names[i]);
  }
  for (const auto& [from, row] : counts) {
    std::uint64_t total = 0;
    for (const auto& [to, c] : row) total += c;
    for (const auto& [to, c] : row) {
      out.graph.add_count(from, to, c);
      out.matrix[from].push_back({to, static_cast<double>(c) / static_cast<double>(total)});
    }
  }
  return out;
}

}  // namespace

TEST_CASE("chain expansion stops at leaves") {
  ContactGraph g;
  g.add_count("A", "B", 1);
  g.add_count("B", "C", 1);
  auto tree = map::build_lookahead_tree(g, "A", 3, no_pruning());
  REQUIRE(tree.size() == 3);
  CHECK(tree.node(1).ap == "B");
  CHECK(tree.node(1).path_prob == doctest::Approx(1.0));
  CHECK(tree.node(2).ap == "C");
  CHECK(tree.node(2).depth == 2);
  CHECK(map::most_probable_sequence(tree) == std::vector<ApId>{"B", "C"});
}

TEST_CASE("k=0 builds a root-only tree") {
  auto tree = map::build_lookahead_tree(example_graph(), "A", 0, no_pruning());
  CHECK(tree.root_only());
  CHECK(map::most_probable_sequence(tree).empty());
}

TEST_CASE("unknown root is rejected") {
  CHECK_THROWS_AS(map::build_lookahead_tree(example_graph(), "Z", 2, no_pruning()),
                  std::invalid_argument);
}

TEST_CASE("worked k=2 example: leaf path probabilities") {
  auto tree = map::build_lookahead_tree(example_graph(), "A", 2, no_pruning());
  REQUIRE(tree.size() == 6);
  CHECK(tree.best_path_prob("B") == doctest::Approx(0.6));
  CHECK(tree.best_path_prob("C") == doctest::Approx(0.4));
  CHECK(tree.best_path_prob("F") == doctest::Approx(0.42));
  CHECK(tree.best_path_prob("G") == doctest::Approx(0.18));
  CHECK(tree.best_path_prob("H") == doctest::Approx(0.40));

  CHECK(tree.lookahead_aps() == std::vector<ApId>{"B", "C", "F", "G", "H"});
}

TEST_CASE("worked k=2 example: most probable sequence is B,F") {
  // oracle first: exhaustive enumeration picks the same path
  oracle::Matrix m{{"A", {{"B", 0.6}, {"C", 0.4}}},
                   {"B", {{"F", 0.7}, {"G", 0.3}}},
                   {"C", {{"H", 1.0}}}};
  CHECK(oracle::brute_most_probable(m, "A", 2) == std::vector<std::string>{"B", "F"});

  auto tree = map::build_lookahead_tree(example_graph(), "A", 2, no_pruning());
  CHECK(map::most_probable_sequence(tree) == std::vector<ApId>{"B", "F"});
}

TEST_CASE("most probable sequence tie-break picks the smaller sequence") {
  ContactGraph g;
  g.add_count("A", "B", 1);
  g.add_count("A", "C", 1);
  auto tree = map::build_lookahead_tree(g, "A", 1, no_pruning());
  CHECK(map::most_probable_sequence(tree) == std::vector<ApId>{"B"});
}

TEST_CASE("deeper paths win over more probable shallow ones") {
  ContactGraph g;
  g.add_count("A", "B", 9);  // B has no successors
  g.add_count("A", "C", 1);
  g.add_count("C", "D", 1);
  auto tree = map::build_lookahead_tree(g, "A", 2, no_pruning());
  CHECK(map::most_probable_sequence(tree) == std::vector<ApId>{"C", "D"});
}

TEST_CASE("hit probability on the worked example") {
  auto tree = map::build_lookahead_tree(example_graph(), "A", 2, no_pruning());
  CHECK(map::hit_probability(tree, {}) == doctest::Approx(0.0));
  CHECK(map::hit_probability(tree, {"B", "C"}) == doctest::Approx(1.0));
  CHECK(map::hit_probability(tree, {"F", "H"}) == doctest::Approx(0.82));
}

TEST_CASE("pruning drops low-probability nodes") {
  auto tree = map::build_lookahead_tree(example_graph(), "A", 2, {0.2, 0});
  // G at 0.18 falls below the threshold
  auto aps = tree.lookahead_aps();
  CHECK(std::find(aps.begin(), aps.end(), "G") == aps.end());
  CHECK(std::find(aps.begin(), aps.end(), "F") != aps.end());
  for (int i = 0; i < tree.size(); ++i) CHECK(tree.node(i).path_prob >= 0.2);
}

TEST_CASE("branching cap keeps the highest-probability children") {
  ContactGraph g;
  for (int i = 0; i < 6; ++i) g.add_count("A", "T" + std::to_string(i), 1 + i);
  auto tree = map::build_lookahead_tree(g, "A", 1, {0.0, 3});
  CHECK(tree.size() == 4);  // root + 3 kept children
  CHECK(tree.lookahead_aps() == std::vector<ApId>{"T5", "T4", "T3"});
}

TEST_CASE("oracle equivalence on random graphs") {
  Rng rng(0x33);
  for (int trial = 0; trial < 100; ++trial) {
    auto pair = random_graph_pair(rng, 12);
    int k = 1 + static_cast<int>(rng.below(4));
    std::vector<std::string> roots(pair.graph.aps().begin(), pair.graph.aps().end());
    std::string root = roots[rng.below(roots.size())];

    auto tree = map::build_lookahead_tree(pair.graph, root, k, no_pruning());

    CHECK(map::most_probable_sequence(tree) ==
          oracle::brute_most_probable(pair.matrix, root, k));

    // random selected set
    std::set<std::string> selected;
    for (const auto& ap : roots)
      if (ap != root && rng.chance(0.4)) selected.insert(ap);
    double expected = oracle::brute_hit_probability(pair.matrix, root, k, selected);
    CHECK(map::hit_probability(tree, selected) == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("hit probability is monotone in the selected set") {
  Rng rng(0x44);
  for (int trial = 0; trial < 50; ++trial) {
    auto pair = random_graph_pair(rng, 10);
    std::vector<std::string> names(pair.graph.aps().begin(), pair.graph.aps().end());
    std::string root = names[rng.below(names.size())];
    auto tree = map::build_lookahead_tree(pair.graph, root, 3, no_pruning());

    std::set<std::string> small, big;
    for (const auto& ap : names) {
      if (rng.chance(0.3)) small.insert(ap);
      if (rng.chance(0.3)) big.insert(ap);
    }
    big.insert(small.begin(), small.end());
    CHECK(map::hit_probability(tree, small) <= map::hit_probability(tree, big) + 1e-12);
  }
}
