#include "ccgg/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <set>

#include "ccgg/errors.hpp"
#include "ccgg/rng.hpp"

namespace ccgg {

Graph::Graph(int num_nodes, std::vector<Edge> edges, std::vector<int> node_labels, int class_label,
             std::optional<std::string> dataset_id)
    : num_nodes_(num_nodes),
      edges_(std::move(edges)),
      node_labels_(std::move(node_labels)),
      class_label_(class_label),
      dataset_id_(std::move(dataset_id)) {
  if (num_nodes_ <= 0) throw ArgumentError("graph must have at least one node");
  if (static_cast<int>(node_labels_.size()) != num_nodes_) {
    throw ArgumentError("node_labels length " + std::to_string(node_labels_.size()) +
                        " != num_nodes " + std::to_string(num_nodes_));
  }
  if (class_label_ < 0) throw ArgumentError("class label must be non-negative");
  for (int label : node_labels_) {
    if (label < 0) throw ArgumentError("node labels must be non-negative");
  }
  for (auto& [u, v] : edges_) {
    if (u < 0 || v < 0 || u >= num_nodes_ || v >= num_nodes_) {
      throw ArgumentError("edge (" + std::to_string(u) + "," + std::to_string(v) +
                          ") out of range for " + std::to_string(num_nodes_) + " nodes");
    }
    if (u == v) throw ArgumentError("self-loop on node " + std::to_string(u));
    if (u > v) std::swap(u, v);
  }
  std::sort(edges_.begin(), edges_.end());
  if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end()) {
    throw ArgumentError("duplicate edge");
  }
}

Graph Graph::unlabeled(int num_nodes, std::vector<Edge> edges, int class_label) {
  return Graph(num_nodes, std::move(edges), std::vector<int>(std::max(num_nodes, 0), 0),
               class_label);
}

std::vector<std::vector<int>> Graph::adjacency_lists() const {
  std::vector<std::vector<int>> adj(num_nodes_);
  for (const auto& [u, v] : edges_) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  for (auto& list : adj) std::sort(list.begin(), list.end());
  return adj;
}

std::vector<int> Graph::degrees() const {
  std::vector<int> deg(num_nodes_, 0);
  for (const auto& [u, v] : edges_) {
    ++deg[u];
    ++deg[v];
  }
  return deg;
}

bool Graph::has_edge(int u, int v) const {
  if (u > v) std::swap(u, v);
  return std::binary_search(edges_.begin(), edges_.end(), Edge{u, v});
}

Graph Graph::with_class(int class_label) const {
  return Graph(num_nodes_, edges_, node_labels_, class_label, dataset_id_);
}

std::vector<int> OrderedGraph::ordered_labels() const {
  std::vector<int> labels(pi.size());
  for (std::size_t k = 0; k < pi.size(); ++k) labels[k] = base.node_labels()[pi[k]];
  return labels;
}

std::vector<Edge> OrderedGraph::reconstruct_edges() const {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < lower_rows.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (lower_rows[i][j]) {
        int u = pi[i];
        int v = pi[j];
        if (u > v) std::swap(u, v);
        edges.emplace_back(u, v);
      }
    }
  }
  std::sort(edges.begin(), edges.end());
  return edges;
}

BlockPartition BlockPartition::make(int num_nodes, int block_size) {
  if (block_size < 1) throw ArgumentError("block size must be positive");
  BlockPartition part;
  part.block_size = block_size;
  for (int begin = 0; begin < num_nodes; begin += block_size) {
    part.blocks.push_back({begin, std::min(begin + block_size, num_nodes)});
  }
  return part;
}

namespace {

std::vector<std::vector<int>> connected_components(const std::vector<std::vector<int>>& adj) {
  const int n = static_cast<int>(adj.size());
  std::vector<int> comp(n, -1);
  std::vector<std::vector<int>> out;
  for (int s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    const int id = static_cast<int>(out.size());
    out.emplace_back();
    std::deque<int> queue{s};
    comp[s] = id;
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      out[id].push_back(u);
      for (int v : adj[u]) {
        if (comp[v] < 0) {
          comp[v] = id;
          queue.push_back(v);
        }
      }
    }
    std::sort(out[id].begin(), out[id].end());
  }
  return out;
}

}  // namespace

Permutation canonical_ordering(const Graph& g) {
  const auto adj = g.adjacency_lists();
  auto components = connected_components(adj);

  auto root_of = [&](const std::vector<int>& members) {
    int best = members.front();
    for (int v : members) {
      if (adj[v].size() > adj[best].size()) best = v;
    }
    return best;
  };

  int global_root = 0;
  for (int v = 0; v < g.num_nodes(); ++v) {
    if (adj[v].size() > adj[global_root].size()) global_root = v;
  }
  // Components are listed by smallest member, so a stable sort keeps the
  // smallest-index tie rule.
  std::stable_sort(components.begin(), components.end(), [&](const auto& a, const auto& b) {
    const bool a_first = std::binary_search(a.begin(), a.end(), global_root);
    const bool b_first = std::binary_search(b.begin(), b.end(), global_root);
    if (a_first != b_first) return a_first;
    return a.size() > b.size();
  });

  Permutation pi;
  pi.reserve(g.num_nodes());
  std::vector<char> seen(g.num_nodes(), 0);
  for (const auto& members : components) {
    const int root = root_of(members);
    std::deque<int> queue{root};
    seen[root] = 1;
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      pi.push_back(u);
      for (int v : adj[u]) {
        if (!seen[v]) {
          seen[v] = 1;
          queue.push_back(v);
        }
      }
    }
  }
  return pi;
}

OrderedGraph order_graph(const Graph& g, const Permutation& pi, int max_nodes) {
  const int n = g.num_nodes();
  if (n > max_nodes) {
    throw CapacityError("graph has " + std::to_string(n) + " nodes, capacity is " +
                        std::to_string(max_nodes));
  }
  if (static_cast<int>(pi.size()) != n) throw ArgumentError("permutation length mismatch");
  std::vector<int> position(n, -1);
  for (int k = 0; k < n; ++k) {
    if (pi[k] < 0 || pi[k] >= n || position[pi[k]] >= 0) {
      throw ArgumentError("not a permutation");
    }
    position[pi[k]] = k;
  }
  OrderedGraph og{g, pi, std::vector<BitRow>(n, BitRow(max_nodes, 0)), max_nodes};
  for (const auto& [u, v] : g.edges()) {
    const int a = position[u];
    const int b = position[v];
    og.lower_rows[std::max(a, b)][std::min(a, b)] = 1;
  }
  return og;
}

std::pair<OrderedGraph, BlockPartition> decompose(const Graph& g, int block_size, int max_nodes) {
  if (g.num_nodes() > max_nodes) {
    throw CapacityError("graph has " + std::to_string(g.num_nodes()) + " nodes, capacity is " +
                        std::to_string(max_nodes));
  }
  auto og = order_graph(g, canonical_ordering(g), max_nodes);
  auto part = BlockPartition::make(g.num_nodes(), block_size);
  return {std::move(og), std::move(part)};
}

Graph prefix_subgraph(const OrderedGraph& og, int t, int block_size) {
  const int n = og.num_nodes();
  const int steps = (n + block_size - 1) / block_size;
  if (t < 1 || t > steps) {
    throw IndexError("step " + std::to_string(t) + " outside [1, " + std::to_string(steps) + "]");
  }
  const int m = std::min(t * block_size, n);
  std::vector<Edge> edges;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < i; ++j) {
      if (og.lower_rows[i][j]) edges.emplace_back(j, i);
    }
  }
  auto labels = og.ordered_labels();
  labels.resize(m);
  return Graph(m, std::move(edges), std::move(labels), og.base.class_label(),
               og.base.dataset_id());
}

int degree_bucket(int degree) {
  if (degree <= 2) return 0;
  if (degree <= 4) return 1;
  return 2;
}

namespace {

Graph label_by_degree(int n, std::vector<Edge> edges, int cls) {
  Graph bare = Graph::unlabeled(n, std::move(edges), cls);
  std::vector<int> labels;
  for (int d : bare.degrees()) labels.push_back(degree_bucket(d));
  return Graph(n, bare.edges(), std::move(labels), cls, std::string("toy"));
}

Graph ring_with_chords(int n, Rng& rng) {
  std::set<Edge> edges;
  std::vector<int> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  rng.shuffle(ids.begin(), ids.end());
  auto add = [&](int a, int b) { edges.insert({std::min(a, b), std::max(a, b)}); };
  for (int i = 0; i < n; ++i) add(ids[i], ids[(i + 1) % n]);
  const int chords = static_cast<int>(std::lround(0.15 * n));
  const std::size_t target = edges.size() + chords;
  while (edges.size() < target) {
    const int a = static_cast<int>(rng.uniform_int(0, n - 1));
    const int b = static_cast<int>(rng.uniform_int(0, n - 1));
    if (a != b) add(a, b);
  }
  return label_by_degree(n, {edges.begin(), edges.end()}, 0);
}

Graph erdos_renyi(int n, double p, Rng& rng) {
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (rng.bernoulli(p)) edges.emplace_back(i, j);
    }
  }
  return label_by_degree(n, std::move(edges), 1);
}

}  // namespace

std::vector<Graph> synthesize_toy_corpus(int n_graphs, std::pair<int, int> node_range,
                                         std::uint64_t seed) {
  if (n_graphs < 2) throw ArgumentError("toy corpus needs at least 2 graphs");
  const auto [lo, hi] = node_range;
  if (lo < 4 || hi > 16 || lo > hi) throw ArgumentError("toy node range must lie within [4, 16]");
  std::vector<Graph> out;
  out.reserve(n_graphs);
  for (int i = 0; i < n_graphs; ++i) {
    Rng rng(substream_seed(seed, static_cast<std::uint64_t>(i)));
    const int n = static_cast<int>(rng.uniform_int(lo, hi));
    out.push_back(i % 2 == 0 ? ring_with_chords(n, rng) : erdos_renyi(n, 0.6, rng));
  }
  return out;
}

NodeCountHistogram node_count_histogram(const std::vector<Graph>& graphs) {
  NodeCountHistogram hist;
  for (const auto& g : graphs) ++hist[g.class_label()][g.num_nodes()];
  return hist;
}

DatasetSplit stratified_split(const std::vector<Graph>& graphs, std::uint64_t seed,
                              double train_fraction, double validation_fraction) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < graphs.size(); ++i) by_class[graphs[i].class_label()].push_back(i);
  DatasetSplit split;
  for (auto& [cls, idx] : by_class) {
    Rng rng(substream_seed(seed, 0x5317, static_cast<std::uint64_t>(cls)));
    rng.shuffle(idx.begin(), idx.end());
    const auto count = idx.size();
    auto n_train = static_cast<std::size_t>(std::lround(train_fraction * count));
    auto n_val = static_cast<std::size_t>(std::lround(validation_fraction * count));
    n_train = std::max<std::size_t>(1, std::min(n_train, count));
    n_val = std::min(n_val, count - n_train);
    for (std::size_t k = 0; k < count; ++k) {
      const Graph& g = graphs[idx[k]];
      if (k < n_train) {
        split.train.push_back(g);
      } else if (k < n_train + n_val) {
        split.validation.push_back(g);
      } else {
        split.test.push_back(g);
      }
    }
  }
  return split;
}

int max_num_nodes(const std::vector<Graph>& graphs) {
  int n = 0;
  for (const auto& g : graphs) n = std::max(n, g.num_nodes());
  return n;
}

int num_classes(const std::vector<Graph>& graphs) {
  int m = 0;
  for (const auto& g : graphs) m = std::max(m, g.class_label() + 1);
  return m;
}

double mean_degree(const Graph& g) {
  return 2.0 * static_cast<double>(g.num_edges()) / g.num_nodes();
}

}  // namespace ccgg
