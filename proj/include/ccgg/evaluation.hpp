#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "ccgg/classifiers.hpp"
#include "ccgg/graph.hpp"

namespace ccgg {

struct GraphStats {
  int lcc = 0;          // nodes in the largest connected component
  long long tc = 0;     // triangles
  double cpl = 0.0;     // mean shortest-path length within the largest component
  double mean_d = 0.0;  // 2|E| / n
  double gini = 0.0;    // sum_ij |d_i - d_j| / (2 n sum d)

  nlohmann::json to_json() const;
};

/// Throws ArgumentError for a graph without nodes. Among equally large
/// components the one holding the smallest node index is used for CPL.
GraphStats graph_stats(const Graph& g);

/// Unweighted mean of per-graph statistics.
struct MeanStats {
  double lcc = 0.0;
  double tc = 0.0;
  double cpl = 0.0;
  double mean_d = 0.0;
  double gini = 0.0;
  std::size_t count = 0;

  nlohmann::json to_json() const;
};

std::optional<MeanStats> mean_stats(const std::vector<Graph>& graphs);
/// |a - b| field by field; count is left at 0.
MeanStats abs_difference(const MeanStats& a, const MeanStats& b);

struct ClassStatsRow {
  int cls = 0;
  std::optional<MeanStats> reference;
  std::optional<MeanStats> generated;
  std::optional<MeanStats> difference;  // missing when either side is empty
};

struct EvalReport {
  std::vector<ClassStatsRow> stats;
  std::map<int, std::optional<double>> accuracy;  // requested class -> fraction
  std::optional<double> auc;

  nlohmann::json to_json() const;
  /// Aligned text table: per class a Real, Generated and |diff| row.
  std::string to_table() const;
};

/// Per-class means for both sets and their absolute differences. Empty class
/// buckets are reported as missing rather than zero.
EvalReport stats_diff_table(const std::vector<Graph>& reference,
                            const std::vector<Graph>& generated, const std::vector<int>& classes);

using GraphClassifierFn = std::function<int(const Graph&)>;

/// For each class present in `generated`: fraction of its graphs the
/// classifier assigns to that class.
std::map<int, double> accuracy_per_class(const std::vector<Graph>& generated,
                                         const GraphClassifierFn& classify);
std::map<int, double> accuracy_per_class(const std::vector<Graph>& generated,
                                         const GraphClassifier& clf);

/// Rank-based ROC AUC with ties counted half; labels are 1 for positive and
/// 0 for negative. Missing when only one label is present.
std::optional<double> auc(std::span<const double> scores, std::span<const int> labels);

/// Class-1 scores of `clf` on `graphs` against their class labels (1 vs rest).
std::optional<double> classifier_auc(const std::vector<Graph>& graphs, const GraphClassifier& clf);

}  // namespace ccgg
