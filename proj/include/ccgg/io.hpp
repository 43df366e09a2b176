#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ccgg/graph.hpp"

namespace ccgg {

/// Graphs loaded from a TU-format directory plus the original label values
/// behind the contiguous ids (index = remapped id).
struct TuDataset {
  std::string name;
  std::vector<Graph> graphs;
  std::vector<long long> class_values;
  std::vector<long long> node_label_values;

  int num_classes() const { return static_cast<int>(class_values.size()); }
  int num_node_labels() const { return std::max<int>(1, static_cast<int>(node_label_values.size())); }
};

/// Reads <dir>/<name>_A.txt, _graph_indicator.txt, _graph_labels.txt and the
/// optional _node_labels.txt. File indices are 1-based. Symmetric pairs
/// collapse into one undirected edge; self-loops are dropped. When
/// `max_nodes` is given, any larger graph raises CapacityError.
TuDataset load_tu_dataset(const std::filesystem::path& directory, const std::string& name,
                          std::optional<int> max_nodes = std::nullopt);

/// Writes graphs in TU format (both edge directions, labels as stored).
void write_tu_dataset(const std::filesystem::path& directory, const std::string& name,
                      const std::vector<Graph>& graphs);

// Generated-graph JSON: {num_nodes, edges: [[i,j],...], node_labels, class_label}.
nlohmann::json graph_to_json(const Graph& g);
Graph graph_from_json(const nlohmann::json& j);
nlohmann::json graphs_to_json(const std::vector<Graph>& graphs);
std::vector<Graph> graphs_from_json(const nlohmann::json& j);

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::filesystem::path& path);

/// Loads either a JSON array of graphs, a single graph file, or a directory
/// of graph files (sorted by filename).
std::vector<Graph> load_graphs(const std::filesystem::path& path);

/// FNV-1a over a file's bytes, hex encoded.
std::string file_hash(const std::filesystem::path& path);

}  // namespace ccgg
