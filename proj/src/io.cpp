#include "ccgg/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>

#include "ccgg/errors.hpp"

namespace fs = std::filesystem;

namespace ccgg {

namespace {

struct Line {
  std::size_t number;
  std::string text;
};

std::vector<Line> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path.string());
  std::vector<Line> lines;
  std::string text;
  std::size_t number = 0;
  while (std::getline(in, text)) {
    ++number;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    lines.push_back({number, std::move(text)});
  }
  return lines;
}

std::vector<long long> parse_ints(const Line& line, const fs::path& file, std::size_t expected) {
  std::vector<long long> values;
  const char* p = line.text.data();
  const char* end = p + line.text.size();
  while (p < end) {
    while (p < end && (*p == ' ' || *p == '\t' || *p == ',')) ++p;
    if (p >= end) break;
    long long v = 0;
    auto [next, ec] = std::from_chars(p, end, v);
    if (ec != std::errc() || (next < end && *next == '.')) {
      // Some TU label files store integral values as floats ("1.0").
      char* stop = nullptr;
      const std::string rest(p, end);
      const double d = std::strtod(rest.c_str(), &stop);
      if (stop == rest.c_str() || d != static_cast<double>(static_cast<long long>(d))) {
        throw FormatError(file.string(), line.number, "expected integer, got '" + line.text + "'");
      }
      v = static_cast<long long>(d);
      next = p + (stop - rest.c_str());
    }
    values.push_back(v);
    p = next;
  }
  if (values.size() != expected) {
    throw FormatError(file.string(), line.number,
                      "expected " + std::to_string(expected) + " value(s), got " +
                          std::to_string(values.size()));
  }
  return values;
}

std::map<long long, int> contiguous_ids(const std::vector<long long>& raw) {
  std::set<long long> distinct(raw.begin(), raw.end());
  std::map<long long, int> ids;
  for (long long v : distinct) ids.emplace(v, static_cast<int>(ids.size()));
  return ids;
}

fs::path required(const fs::path& dir, const std::string& name, const std::string& suffix) {
  fs::path p = dir / (name + suffix);
  if (!fs::exists(p)) throw IngestionError("missing mandatory file " + p.string());
  return p;
}

}  // namespace

TuDataset load_tu_dataset(const fs::path& directory, const std::string& name,
                          std::optional<int> max_nodes) {
  const fs::path a_file = required(directory, name, "_A.txt");
  const fs::path indicator_file = required(directory, name, "_graph_indicator.txt");
  const fs::path labels_file = required(directory, name, "_graph_labels.txt");
  const fs::path node_labels_file = directory / (name + "_node_labels.txt");

  // Node -> graph id.
  const auto indicator_lines = read_lines(indicator_file);
  std::vector<long long> graph_of(indicator_lines.size());
  for (std::size_t i = 0; i < indicator_lines.size(); ++i) {
    graph_of[i] = parse_ints(indicator_lines[i], indicator_file, 1)[0];
  }

  const auto label_lines = read_lines(labels_file);
  std::vector<long long> raw_class(label_lines.size());
  for (std::size_t i = 0; i < label_lines.size(); ++i) {
    raw_class[i] = parse_ints(label_lines[i], labels_file, 1)[0];
  }

  std::vector<long long> raw_node_labels(graph_of.size(), 0);
  const bool has_node_labels = fs::exists(node_labels_file);
  if (has_node_labels) {
    const auto lines = read_lines(node_labels_file);
    if (lines.size() != graph_of.size()) {
      throw FormatError(node_labels_file.string(), lines.empty() ? 0 : lines.back().number,
                        "expected " + std::to_string(graph_of.size()) + " node labels, got " +
                            std::to_string(lines.size()));
    }
    for (std::size_t i = 0; i < lines.size(); ++i) {
      // Multi-column label files keep the first column.
      const auto& text = lines[i].text;
      Line first{lines[i].number, text.substr(0, text.find(','))};
      raw_node_labels[i] = parse_ints(first, node_labels_file, 1)[0];
    }
  }

  // Graph ids are 1..G, one label line per graph.
  std::map<long long, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < graph_of.size(); ++i) {
    const long long gid = graph_of[i];
    if (gid < 1 || gid > static_cast<long long>(raw_class.size())) {
      throw FormatError(indicator_file.string(), indicator_lines[i].number,
                        "graph id " + std::to_string(gid) + " has no entry in " +
                            labels_file.filename().string());
    }
    members[gid].push_back(i);
  }
  std::vector<int> local(graph_of.size());
  for (auto& [gid, nodes] : members) {
    for (std::size_t k = 0; k < nodes.size(); ++k) local[nodes[k]] = static_cast<int>(k);
  }

  std::map<long long, std::set<Edge>> edges;
  const auto a_lines = read_lines(a_file);
  const auto total = static_cast<long long>(graph_of.size());
  for (const auto& line : a_lines) {
    const auto ij = parse_ints(line, a_file, 2);
    const long long i = ij[0];
    const long long j = ij[1];
    if (i < 1 || j < 1 || i > total || j > total) {
      throw FormatError(a_file.string(), line.number,
                        "node id outside [1, " + std::to_string(total) + "]");
    }
    if (graph_of[i - 1] != graph_of[j - 1]) {
      throw FormatError(a_file.string(), line.number,
                        "edge (" + std::to_string(i) + ", " + std::to_string(j) +
                            ") references a node outside its graph");
    }
    if (i == j) continue;
    int u = local[i - 1];
    int v = local[j - 1];
    if (u > v) std::swap(u, v);
    edges[graph_of[i - 1]].insert({u, v});
  }

  const auto class_ids = contiguous_ids(raw_class);
  const auto node_ids =
      has_node_labels ? contiguous_ids(raw_node_labels) : std::map<long long, int>{{0, 0}};

  TuDataset ds;
  ds.name = name;
  for (const auto& [v, id] : class_ids) ds.class_values.push_back(v);
  for (const auto& [v, id] : node_ids) ds.node_label_values.push_back(v);
  for (const auto& [gid, nodes] : members) {
    const int n = static_cast<int>(nodes.size());
    if (max_nodes && n > *max_nodes) {
      throw CapacityError(name + " graph " + std::to_string(gid) + " has " + std::to_string(n) +
                          " nodes, capacity is " + std::to_string(*max_nodes));
    }
    std::vector<int> labels(n);
    for (int k = 0; k < n; ++k) labels[k] = node_ids.at(raw_node_labels[nodes[k]]);
    const auto& es = edges[gid];
    ds.graphs.emplace_back(n, std::vector<Edge>(es.begin(), es.end()), std::move(labels),
                           class_ids.at(raw_class[gid - 1]), name);
  }
  return ds;
}

void write_tu_dataset(const fs::path& directory, const std::string& name,
                      const std::vector<Graph>& graphs) {
  fs::create_directories(directory);
  std::ofstream a(directory / (name + "_A.txt"));
  std::ofstream indicator(directory / (name + "_graph_indicator.txt"));
  std::ofstream labels(directory / (name + "_graph_labels.txt"));
  std::ofstream node_labels(directory / (name + "_node_labels.txt"));
  if (!a || !indicator || !labels || !node_labels) {
    throw IngestionError("cannot write TU files under " + directory.string());
  }
  long long offset = 1;
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const Graph& g = graphs[gi];
    for (int v = 0; v < g.num_nodes(); ++v) {
      indicator << gi + 1 << '\n';
      node_labels << g.node_labels()[v] << '\n';
    }
    for (const auto& [u, v] : g.edges()) {
      a << offset + u << ", " << offset + v << '\n';
      a << offset + v << ", " << offset + u << '\n';
    }
    labels << g.class_label() << '\n';
    offset += g.num_nodes();
  }
}

nlohmann::json graph_to_json(const Graph& g) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [u, v] : g.edges()) edges.push_back({u, v});
  return {{"num_nodes", g.num_nodes()},
          {"edges", std::move(edges)},
          {"node_labels", g.node_labels()},
          {"class_label", g.class_label()}};
}

Graph graph_from_json(const nlohmann::json& j) {
  try {
    std::vector<Edge> edges;
    for (const auto& e : j.at("edges")) edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    return Graph(j.at("num_nodes").get<int>(), std::move(edges),
                 j.at("node_labels").get<std::vector<int>>(), j.at("class_label").get<int>());
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("malformed graph JSON: ") + e.what());
  }
}

nlohmann::json graphs_to_json(const std::vector<Graph>& graphs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& g : graphs) arr.push_back(graph_to_json(g));
  return arr;
}

std::vector<Graph> graphs_from_json(const nlohmann::json& j) {
  std::vector<Graph> out;
  for (const auto& item : j) out.push_back(graph_from_json(item));
  return out;
}

void write_json_file(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw IngestionError(path.string() + ": " + e.what());
  }
}

std::vector<Graph> load_graphs(const fs::path& path) {
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path)) {
      const auto fname = entry.path().filename().string();
      if (entry.path().extension() == ".json" && fname != "manifest.json") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    std::vector<Graph> out;
    for (const auto& f : files) out.push_back(graph_from_json(read_json_file(f)));
    return out;
  }
  const auto j = read_json_file(path);
  if (j.is_array()) return graphs_from_json(j);
  return {graph_from_json(j)};
}

std::string file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open " + path.string());
  std::uint64_t h = 1469598103934665603ULL;
  char buf[4096];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

}  // namespace ccgg
