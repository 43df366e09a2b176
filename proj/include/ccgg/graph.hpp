#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ccgg {

/// Undirected edge stored with first < second.
using Edge = std::pair<int, int>;

/// Undirected simple graph with per-node categorical labels and a graph class.
///
/// Construction validates and normalizes: edges are reoriented so that
/// first < second and sorted. Self-loops, duplicates and out-of-range
/// endpoints are rejected with ArgumentError. Immutable afterwards.
class Graph {
 public:
  Graph(int num_nodes, std::vector<Edge> edges, std::vector<int> node_labels, int class_label,
        std::optional<std::string> dataset_id = std::nullopt);

  /// Convenience: all node labels zero.
  static Graph unlabeled(int num_nodes, std::vector<Edge> edges, int class_label = 0);

  int num_nodes() const { return num_nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t num_edges() const { return edges_.size(); }
  const std::vector<int>& node_labels() const { return node_labels_; }
  int class_label() const { return class_label_; }
  const std::optional<std::string>& dataset_id() const { return dataset_id_; }

  /// Sorted neighbor lists.
  std::vector<std::vector<int>> adjacency_lists() const;
  std::vector<int> degrees() const;
  bool has_edge(int u, int v) const;

  Graph with_class(int class_label) const;

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.num_nodes_ == b.num_nodes_ && a.edges_ == b.edges_ &&
           a.node_labels_ == b.node_labels_ && a.class_label_ == b.class_label_;
  }

 private:
  int num_nodes_;
  std::vector<Edge> edges_;
  std::vector<int> node_labels_;
  int class_label_;
  std::optional<std::string> dataset_id_;
};

using Permutation = std::vector<int>;
using BitRow = std::vector<std::uint8_t>;

/// A graph viewed under a node ordering. `pi[k]` is the original index of the
/// k-th ordered node; `lower_rows[k][j]` is 1 iff ordered nodes k and j are
/// adjacent and j < k. Every row has length `max_nodes`.
struct OrderedGraph {
  Graph base;
  Permutation pi;
  std::vector<BitRow> lower_rows;
  int max_nodes = 0;

  int num_nodes() const { return base.num_nodes(); }
  /// Node labels in ordered position.
  std::vector<int> ordered_labels() const;
  /// Edges (in original indices) recovered from A = L + L^T and un-permuted.
  std::vector<Edge> reconstruct_edges() const;
};

/// Half-open range [begin, end) of 0-based ordered node positions.
struct Block {
  int begin = 0;
  int end = 0;
  int size() const { return end - begin; }
  friend bool operator==(const Block&, const Block&) = default;
};

struct BlockPartition {
  int block_size = 1;
  std::vector<Block> blocks;

  static BlockPartition make(int num_nodes, int block_size);
  int num_steps() const { return static_cast<int>(blocks.size()); }
};

/// Max-degree rooted breadth-first ordering. Ties go to the smaller index and
/// neighbors are visited in index order. The component holding the global
/// max-degree node comes first; remaining components follow by descending
/// size, then smallest contained index, each rooted by the same rule.
Permutation canonical_ordering(const Graph& g);

/// Orders `g` canonically and splits its rows into blocks of `block_size`.
/// Throws CapacityError if g has more than `max_nodes` nodes.
std::pair<OrderedGraph, BlockPartition> decompose(const Graph& g, int block_size, int max_nodes);

/// Same, but with a caller-supplied ordering.
OrderedGraph order_graph(const Graph& g, const Permutation& pi, int max_nodes);

/// Induced subgraph on the first min(t*B, n) ordered nodes (ordered indexing).
/// `t` is 1-based; throws IndexError outside [1, T].
Graph prefix_subgraph(const OrderedGraph& og, int t, int block_size);

/// Balanced two-class synthetic corpus: class 0 is a ring with a few random
/// chords (mean degree near 2.3), class 1 is G(n, 0.6). Node labels are the
/// degree bucketed into {0: <=2, 1: 3..4, 2: >=5}.
std::vector<Graph> synthesize_toy_corpus(int n_graphs, std::pair<int, int> node_range,
                                         std::uint64_t seed);

inline constexpr int kToyNodeLabels = 3;
int degree_bucket(int degree);

/// Per-class histogram of node counts: class -> (num_nodes -> count).
using NodeCountHistogram = std::map<int, std::map<int, int>>;
NodeCountHistogram node_count_histogram(const std::vector<Graph>& graphs);

struct DatasetSplit {
  std::vector<Graph> train;
  std::vector<Graph> validation;
  std::vector<Graph> test;

  NodeCountHistogram train_histogram() const { return node_count_histogram(train); }
  NodeCountHistogram validation_histogram() const { return node_count_histogram(validation); }
  NodeCountHistogram test_histogram() const { return node_count_histogram(test); }
};

/// Stratified split by class (default 80/10/10) under a seeded shuffle.
/// Throws ArgumentError if some class would be missing from train.
DatasetSplit stratified_split(const std::vector<Graph>& graphs, std::uint64_t seed,
                              double train_fraction = 0.8, double validation_fraction = 0.1);

int max_num_nodes(const std::vector<Graph>& graphs);
int num_classes(const std::vector<Graph>& graphs);
double mean_degree(const Graph& g);

}  // namespace ccgg
