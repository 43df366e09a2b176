#include <set>

#include "doctest.h"
#include "helpers.hpp"

#include "ccgg/errors.hpp"
#include "ccgg/graph.hpp"

using namespace ccgg;
using testing::random_graph;

namespace {

Graph triangle() { return Graph::unlabeled(3, {{0, 1}, {1, 2}, {0, 2}}); }

BitRow bits(std::initializer_list<int> v) { return BitRow(v.begin(), v.end()); }

}  // namespace

TEST_CASE("graph construction normalizes and validates") {
  Graph g(3, {{2, 0}, {1, 0}}, {0, 1, 2}, 1);
  CHECK(g.edges() == std::vector<Edge>{{0, 1}, {0, 2}});
  CHECK(g.degrees() == std::vector<int>{2, 1, 1});
  CHECK(g.has_edge(2, 0));
  CHECK_FALSE(g.has_edge(1, 2));

  CHECK_THROWS_AS(Graph::unlabeled(3, {{1, 1}}), ArgumentError);
  CHECK_THROWS_AS(Graph::unlabeled(3, {{0, 1}, {1, 0}}), ArgumentError);
  CHECK_THROWS_AS(Graph::unlabeled(3, {{0, 3}}), ArgumentError);
  CHECK_THROWS_AS(Graph(3, {}, {0, 0}, 0), ArgumentError);
  CHECK_THROWS_AS(Graph::unlabeled(0, {}), ArgumentError);
}

TEST_CASE("isolated nodes are kept") {
  Graph g = Graph::unlabeled(4, {{0, 1}});
  CHECK(g.num_nodes() == 4);
  CHECK(g.degrees() == std::vector<int>{1, 1, 0, 0});
}

TEST_CASE("canonical ordering examples") {
  SUBCASE("star rooted at its center") {
    Graph star = Graph::unlabeled(5, {{3, 0}, {3, 1}, {3, 2}, {3, 4}});
    CHECK(canonical_ordering(star).front() == 3);
  }
  SUBCASE("path 0-1-2") {
    Graph path = Graph::unlabeled(3, {{0, 1}, {1, 2}});
    CHECK(canonical_ordering(path) == Permutation{1, 0, 2});
  }
  SUBCASE("two disjoint triangles keep components contiguous") {
    Graph g = Graph::unlabeled(6, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}});
    const auto pi = canonical_ordering(g);
    CHECK(std::set<int>(pi.begin(), pi.begin() + 3) == std::set<int>{0, 1, 2});
    CHECK(std::set<int>(pi.begin() + 3, pi.end()) == std::set<int>{3, 4, 5});
  }
  SUBCASE("remaining components by size, then smallest index") {
    // Path 2-3-4 holds the max-degree node; then {0,1}, then isolated 5.
    Graph g = Graph::unlabeled(6, {{2, 3}, {3, 4}, {0, 1}});
    const auto pi = canonical_ordering(g);
    CHECK(pi.front() == 3);
    CHECK(std::set<int>(pi.begin(), pi.begin() + 3) == std::set<int>{2, 3, 4});
    CHECK(pi[3] == 0);
    CHECK(pi[5] == 5);
  }
}

TEST_CASE("canonical ordering is a deterministic bijection") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    Graph g = random_graph(rng, 1, 12, 0.25);
    const auto pi = canonical_ordering(g);
    std::vector<int> sorted = pi;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> expected(g.num_nodes());
    std::iota(expected.begin(), expected.end(), 0);
    CHECK(sorted == expected);
    CHECK(canonical_ordering(g) == pi);
  }
}

TEST_CASE("decompose examples") {
  SUBCASE("triangle, B=1, N=5") {
    auto [og, part] = decompose(triangle(), 1, 5);
    CHECK(part.num_steps() == 3);
    CHECK(og.lower_rows ==
          std::vector<BitRow>{bits({0, 0, 0, 0, 0}), bits({1, 0, 0, 0, 0}), bits({1, 1, 0, 0, 0})});
  }
  SUBCASE("5 nodes, B=2") {
    auto [og, part] = decompose(Graph::unlabeled(5, {{0, 1}}), 2, 5);
    CHECK(part.blocks == std::vector<Block>{{0, 2}, {2, 4}, {4, 5}});
  }
  SUBCASE("edgeless graph") {
    auto [og, part] = decompose(Graph::unlabeled(3, {}), 2, 3);
    for (const auto& row : og.lower_rows) CHECK(std::count(row.begin(), row.end(), 1) == 0);
  }
  SUBCASE("capacity") {
    CHECK_THROWS_AS(decompose(triangle(), 1, 2), CapacityError);
  }
}

TEST_CASE("block partition covers nodes in order") {
  for (int n = 1; n <= 12; ++n) {
    for (int b = 1; b <= 5; ++b) {
      const auto part = BlockPartition::make(n, b);
      int next = 0;
      for (std::size_t t = 0; t < part.blocks.size(); ++t) {
        CHECK(part.blocks[t].begin == next);
        if (t + 1 < part.blocks.size()) CHECK(part.blocks[t].size() == b);
        CHECK(part.blocks[t].size() >= 1);
        next = part.blocks[t].end;
      }
      CHECK(next == n);
    }
  }
}

TEST_CASE("lower rows round-trip to the original edge set (n <= 8)") {
  Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    Graph g = random_graph(rng, 1, 8, rng.uniform());
    auto [og, part] = decompose(g, 1 + trial % 3, 8);
    std::vector<Edge> rec = og.reconstruct_edges();
    std::sort(rec.begin(), rec.end());
    CHECK(rec == g.edges());
    for (int i = 0; i < g.num_nodes(); ++i) {
      for (int j = i; j < 8; ++j) CHECK(og.lower_rows[i][j] == 0);
    }
  }
}

TEST_CASE("prefix subgraph") {
  SUBCASE("triangle t=2") {
    auto [og, part] = decompose(triangle(), 1, 3);
    Graph p = prefix_subgraph(og, 2, 1);
    CHECK(p.num_nodes() == 2);
    CHECK(p.num_edges() == 1);
  }
  SUBCASE("out of range") {
    auto [og, part] = decompose(triangle(), 1, 3);
    CHECK_THROWS_AS(prefix_subgraph(og, 0, 1), IndexError);
    CHECK_THROWS_AS(prefix_subgraph(og, 4, 1), IndexError);
  }
  SUBCASE("matches the brute-force induced subgraph and nests") {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
      Graph g = random_graph(rng, 6, 10, 0.4, 3, 1);
      const int b = 1 + trial % 3;
      auto [og, part] = decompose(g, b, 10);
      for (int t = 1; t <= part.num_steps(); ++t) {
        Graph p = prefix_subgraph(og, t, b);
        const int k = std::min(t * b, g.num_nodes());
        std::vector<int> nodes(og.pi.begin(), og.pi.begin() + k);
        CHECK(p.num_nodes() == k);
        CHECK(p.edges() == testing::induced_edges(g, nodes));
        CHECK(p.class_label() == 1);
        for (int v = 0; v < k; ++v) CHECK(p.node_labels()[v] == g.node_labels()[nodes[v]]);
        if (t < part.num_steps()) {
          Graph next = prefix_subgraph(og, t + 1, b);
          for (const auto& [u, v] : p.edges()) CHECK(next.has_edge(u, v));
          for (const auto& [u, v] : next.edges()) {
            if (u < k && v < k) CHECK(p.has_edge(u, v));
          }
        }
      }
      CHECK(prefix_subgraph(og, part.num_steps(), b).num_edges() == g.num_edges());
    }
  }
  SUBCASE("6 nodes, B=2, t=2 gives 4 nodes") {
    Graph g = Graph::unlabeled(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {0, 5}, {1, 4}});
    auto [og, part] = decompose(g, 2, 6);
    CHECK(prefix_subgraph(og, 2, 2).num_nodes() == 4);
  }
}

TEST_CASE("toy corpus") {
  const auto a = synthesize_toy_corpus(200, {6, 12}, 7);
  const auto b = synthesize_toy_corpus(200, {6, 12}, 7);
  CHECK(a == b);
  CHECK(a.size() == 200);

  double deg[2] = {0, 0};
  int count[2] = {0, 0};
  for (const auto& g : a) {
    CHECK(g.num_nodes() >= 6);
    CHECK(g.num_nodes() <= 12);
    deg[g.class_label()] += mean_degree(g);
    ++count[g.class_label()];
    for (std::size_t v = 0; v < g.node_labels().size(); ++v) {
      CHECK(g.node_labels()[v] == degree_bucket(g.degrees()[v]));
    }
    if (g.class_label() == 0) {
      // Ring backbone: connected, every node has degree >= 2.
      const auto deg0 = g.degrees();
      CHECK(*std::min_element(deg0.begin(), deg0.end()) >= 2);
      std::vector<int> seen(g.num_nodes(), 0);
      std::vector<int> stack{0};
      seen[0] = 1;
      const auto adj = g.adjacency_lists();
      while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        for (int v : adj[u]) {
          if (!seen[v]) {
            seen[v] = 1;
            stack.push_back(v);
          }
        }
      }
      CHECK(std::count(seen.begin(), seen.end(), 1) == g.num_nodes());
    }
  }
  CHECK(count[0] == 100);
  CHECK(count[1] == 100);
  CHECK(deg[1] / count[1] - deg[0] / count[0] > 1.0);

  CHECK_THROWS_AS(synthesize_toy_corpus(1, {6, 12}, 7), ArgumentError);
  CHECK_THROWS_AS(synthesize_toy_corpus(10, {3, 12}, 7), ArgumentError);
  CHECK_THROWS_AS(synthesize_toy_corpus(10, {6, 17}, 7), ArgumentError);
}

TEST_CASE("stratified split") {
  const auto corpus = synthesize_toy_corpus(200, {6, 12}, 3);
  const auto split = stratified_split(corpus, 9);
  CHECK(split.train.size() == 160);
  CHECK(split.validation.size() == 20);
  CHECK(split.test.size() == 20);
  CHECK(num_classes(split.train) == 2);
  const auto hist = split.train_histogram();
  int total = 0;
  for (const auto& [cls, counts] : hist) {
    for (const auto& [n, k] : counts) total += k;
  }
  CHECK(total == 160);
  const auto again = stratified_split(corpus, 9);
  CHECK(again.train == split.train);
  CHECK(again.test == split.test);

  std::vector<Graph> one_class{Graph::unlabeled(2, {{0, 1}}, 1)};
  CHECK_NOTHROW(stratified_split(one_class, 1));
}
