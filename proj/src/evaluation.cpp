#include "ccgg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <queue>

#include "ccgg/errors.hpp"
#include "ccgg/parallel.hpp"

namespace ccgg {

namespace {

nlohmann::json optional_json(const std::optional<MeanStats>& s) {
  return s ? s->to_json() : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json GraphStats::to_json() const {
  return {{"lcc", lcc}, {"tc", tc}, {"cpl", cpl}, {"mean_d", mean_d}, {"gini", gini}};
}

nlohmann::json MeanStats::to_json() const {
  return {{"lcc", lcc}, {"tc", tc},     {"cpl", cpl},
          {"mean_d", mean_d}, {"gini", gini}, {"count", count}};
}

GraphStats graph_stats(const Graph& g) {
  const int n = g.num_nodes();
  if (n < 1) throw ArgumentError("graph_stats: empty graph");
  const auto adj = g.adjacency_lists();
  GraphStats s;

  // Components in index order; the first largest one wins ties.
  std::vector<int> comp(n, -1);
  int best = -1;
  int best_size = 0;
  for (int root = 0, id = 0; root < n; ++root) {
    if (comp[root] >= 0) continue;
    int size = 0;
    std::queue<int> q;
    q.push(root);
    comp[root] = id;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      ++size;
      for (int v : adj[u]) {
        if (comp[v] < 0) {
          comp[v] = id;
          q.push(v);
        }
      }
    }
    if (size > best_size) {
      best_size = size;
      best = id;
    }
    ++id;
  }
  s.lcc = best_size;

  std::vector<std::vector<char>> is_adj(n, std::vector<char>(n, 0));
  for (const auto& [u, v] : g.edges()) is_adj[u][v] = is_adj[v][u] = 1;
  for (const auto& [u, v] : g.edges()) {
    for (int w : adj[v]) {
      if (w > v && is_adj[u][w]) ++s.tc;
    }
  }

  if (best_size > 1) {
    long long dist_sum = 0;
    std::vector<int> dist(n);
    for (int src = 0; src < n; ++src) {
      if (comp[src] != best) continue;
      std::fill(dist.begin(), dist.end(), -1);
      dist[src] = 0;
      std::queue<int> q;
      q.push(src);
      while (!q.empty()) {
        const int u = q.front();
        q.pop();
        for (int v : adj[u]) {
          if (dist[v] < 0) {
            dist[v] = dist[u] + 1;
            q.push(v);
          }
        }
      }
      for (int v = src + 1; v < n; ++v) {
        if (dist[v] > 0) dist_sum += dist[v];
      }
    }
    const double pairs = 0.5 * best_size * (best_size - 1.0);
    s.cpl = static_cast<double>(dist_sum) / pairs;
  }

  auto deg = g.degrees();
  const long long deg_sum = std::accumulate(deg.begin(), deg.end(), 0LL);
  s.mean_d = static_cast<double>(deg_sum) / n;
  if (deg_sum > 0) {
    // sum_ij |d_i - d_j| = 2 sum_i (2i - n + 1) d_(i) over the ascending order.
    std::sort(deg.begin(), deg.end());
    long long abs_sum = 0;
    for (int i = 0; i < n; ++i) abs_sum += static_cast<long long>(2 * i - n + 1) * deg[i];
    abs_sum *= 2;
    s.gini = static_cast<double>(abs_sum) / (2.0 * n * static_cast<double>(deg_sum));
  }
  return s;
}

std::optional<MeanStats> mean_stats(const std::vector<Graph>& graphs) {
  if (graphs.empty()) return std::nullopt;
  std::vector<GraphStats> per(graphs.size());
  parallel_for(graphs.size(), [&](std::size_t i) { per[i] = graph_stats(graphs[i]); });
  MeanStats m;
  for (const auto& s : per) {
    m.lcc += s.lcc;
    m.tc += static_cast<double>(s.tc);
    m.cpl += s.cpl;
    m.mean_d += s.mean_d;
    m.gini += s.gini;
  }
  const double inv = 1.0 / static_cast<double>(graphs.size());
  m.lcc *= inv;
  m.tc *= inv;
  m.cpl *= inv;
  m.mean_d *= inv;
  m.gini *= inv;
  m.count = graphs.size();
  return m;
}

MeanStats abs_difference(const MeanStats& a, const MeanStats& b) {
  MeanStats d;
  d.lcc = std::abs(a.lcc - b.lcc);
  d.tc = std::abs(a.tc - b.tc);
  d.cpl = std::abs(a.cpl - b.cpl);
  d.mean_d = std::abs(a.mean_d - b.mean_d);
  d.gini = std::abs(a.gini - b.gini);
  return d;
}

EvalReport stats_diff_table(const std::vector<Graph>& reference,
                            const std::vector<Graph>& generated, const std::vector<int>& classes) {
  EvalReport report;
  for (int cls : classes) {
    std::vector<Graph> ref;
    std::vector<Graph> gen;
    for (const auto& g : reference) {
      if (g.class_label() == cls) ref.push_back(g);
    }
    for (const auto& g : generated) {
      if (g.class_label() == cls) gen.push_back(g);
    }
    ClassStatsRow row;
    row.cls = cls;
    row.reference = mean_stats(ref);
    row.generated = mean_stats(gen);
    if (row.reference && row.generated) row.difference = abs_difference(*row.reference, *row.generated);
    report.stats.push_back(row);
  }
  return report;
}

std::map<int, double> accuracy_per_class(const std::vector<Graph>& generated,
                                         const GraphClassifierFn& classify) {
  std::map<int, std::pair<int, int>> tally;  // class -> (correct, total)
  for (const auto& g : generated) {
    auto& [correct, total] = tally[g.class_label()];
    correct += classify(g) == g.class_label();
    ++total;
  }
  std::map<int, double> out;
  for (const auto& [cls, t] : tally) out[cls] = static_cast<double>(t.first) / t.second;
  return out;
}

std::map<int, double> accuracy_per_class(const std::vector<Graph>& generated,
                                         const GraphClassifier& clf) {
  std::vector<int> predicted(generated.size());
  parallel_for(generated.size(),
               [&](std::size_t i) { predicted[i] = classify_graph(clf, generated[i]).predicted(); });
  std::size_t next = 0;
  // Called in input order, so the lookup by position is consistent.
  return accuracy_per_class(generated, [&](const Graph&) { return predicted[next++]; });
}

std::optional<double> auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ArgumentError("auc: scores/labels length mismatch");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Average ranks over tie groups, then the Mann-Whitney statistic.
  double pos_rank_sum = 0.0;
  long long n_pos = 0;
  long long n_neg = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[idx[k]] == 1) {
        pos_rank_sum += avg_rank;
        ++n_pos;
      } else {
        ++n_neg;
      }
    }
    i = j;
  }
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  const double u = pos_rank_sum - 0.5 * static_cast<double>(n_pos) * (n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::optional<double> classifier_auc(const std::vector<Graph>& graphs, const GraphClassifier& clf) {
  if (clf.config().num_classes < 2) return std::nullopt;
  std::vector<double> scores(graphs.size());
  std::vector<int> labels(graphs.size());
  parallel_for(graphs.size(), [&](std::size_t i) {
    scores[i] = classify_graph(clf, graphs[i]).normalized(1);
    labels[i] = graphs[i].class_label() == 1 ? 1 : 0;
  });
  return auc(scores, labels);
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["classes"] = nlohmann::json::array();
  for (const auto& row : stats) {
    j["classes"].push_back({{"class", row.cls},
                            {"reference", optional_json(row.reference)},
                            {"generated", optional_json(row.generated)},
                            {"difference", optional_json(row.difference)}});
  }
  nlohmann::json acc = nlohmann::json::object();
  for (const auto& [cls, a] : accuracy) acc[std::to_string(cls)] = a ? nlohmann::json(*a) : nullptr;
  j["accuracy"] = acc;
  j["auc"] = auc ? nlohmann::json(*auc) : nlohmann::json(nullptr);
  return j;
}

std::string EvalReport::to_table() const {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-6s %-10s %10s %10s %10s %10s %10s\n", "class", "row", "LCC",
                "TC", "CPL", "MeanD", "GINI");
  out += buf;
  auto line = [&](int cls, const char* name, const std::optional<MeanStats>& s) {
    if (s) {
      std::snprintf(buf, sizeof buf, "%-6d %-10s %10.3f %10.3f %10.3f %10.3f %10.3f\n", cls, name,
                    s->lcc, s->tc, s->cpl, s->mean_d, s->gini);
    } else {
      std::snprintf(buf, sizeof buf, "%-6d %-10s %10s %10s %10s %10s %10s\n", cls, name, "-", "-",
                    "-", "-", "-");
    }
    out += buf;
  };
  for (const auto& row : stats) {
    line(row.cls, "Real", row.reference);
    line(row.cls, "Generated", row.generated);
    line(row.cls, "|diff|", row.difference);
  }
  if (!accuracy.empty()) {
    out += "\naccuracy";
    for (const auto& [cls, a] : accuracy) {
      if (a) {
        std::snprintf(buf, sizeof buf, "  class %d: %.2f%%", cls, 100.0 * *a);
      } else {
        std::snprintf(buf, sizeof buf, "  class %d: -", cls);
      }
      out += buf;
    }
    out += "\n";
  }
  if (auc) {
    std::snprintf(buf, sizeof buf, "AUC %.4f\n", *auc);
  } else {
    std::snprintf(buf, sizeof buf, "AUC -\n");
  }
  out += buf;
  return out;
}

}  // namespace ccgg
