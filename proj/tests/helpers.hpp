#pragma once

// Shared fixtures and independent oracles for the test suites. The oracles
// deliberately use different algorithms from the library code (dense
// matrices, Floyd-Warshall, enumeration) so that agreement means something.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ccgg/autodiff.hpp"
#include "ccgg/graph.hpp"
#include "ccgg/rng.hpp"

namespace testing {

using ccgg::Edge;
using ccgg::Graph;
using ccgg::Rng;

inline std::filesystem::path data_dir() {
  if (const char* d = std::getenv("CCGG_TEST_DATA")) return d;
  return std::filesystem::path(__FILE__).parent_path() / "data";
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("ccgg_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

/// G(n, p) with n uniform in [n_lo, n_hi] and labels uniform in [0, num_labels).
inline Graph random_graph(Rng& rng, int n_lo, int n_hi, double p, int num_labels = 1,
                          int class_label = 0) {
  const int n = static_cast<int>(rng.uniform_int(n_lo, n_hi));
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (rng.bernoulli(p)) edges.emplace_back(i, j);
    }
  }
  std::vector<int> labels(n);
  for (auto& l : labels) l = static_cast<int>(rng.uniform_int(0, num_labels - 1));
  return Graph(n, edges, labels, class_label);
}

inline std::vector<int> random_permutation(int n, Rng& rng) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  rng.shuffle(p.begin(), p.end());
  return p;
}

/// Node v of `g` becomes node perm[v].
inline Graph relabel(const Graph& g, const std::vector<int>& perm) {
  std::vector<Edge> edges;
  for (const auto& [u, v] : g.edges()) edges.emplace_back(perm[u], perm[v]);
  std::vector<int> labels(g.num_nodes());
  for (int v = 0; v < g.num_nodes(); ++v) labels[perm[v]] = g.node_labels()[v];
  return Graph(g.num_nodes(), edges, labels, g.class_label());
}

inline Eigen::MatrixXd dense_adjacency(const Graph& g) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(g.num_nodes(), g.num_nodes());
  for (const auto& [u, v] : g.edges()) a(u, v) = a(v, u) = 1.0;
  return a;
}

/// Brute-force induced subgraph on `nodes` (new index = position in `nodes`).
inline std::vector<Edge> induced_edges(const Graph& g, const std::vector<int>& nodes) {
  std::vector<Edge> out;
  for (std::size_t a = 0; a < nodes.size(); ++a) {
    for (std::size_t b = a + 1; b < nodes.size(); ++b) {
      if (g.has_edge(nodes[a], nodes[b])) out.emplace_back(static_cast<int>(a), static_cast<int>(b));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct OracleStats {
  int lcc = 0;
  long long tc = 0;
  double cpl = 0.0;
  double mean_d = 0.0;
  double gini = 0.0;
};

/// Trace(A^3)/6 triangles, Floyd-Warshall distances, pairwise-difference Gini.
inline OracleStats oracle_stats(const Graph& g) {
  const int n = g.num_nodes();
  const Eigen::MatrixXd a = dense_adjacency(g);
  OracleStats s;
  s.tc = std::llround((a * a * a).trace() / 6.0);

  const int inf = std::numeric_limits<int>::max() / 4;
  std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
  for (int i = 0; i < n; ++i) {
    d[i][i] = 0;
    for (int j = 0; j < n; ++j) {
      if (a(i, j) != 0.0) d[i][j] = 1;
    }
  }
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
    }
  }
  // Largest component; ties go to the component holding the smallest index.
  int best_root = -1;
  for (int i = 0; i < n; ++i) {
    int size = 0;
    bool is_min = true;
    for (int j = 0; j < n; ++j) {
      if (d[i][j] < inf) {
        ++size;
        if (j < i) is_min = false;
      }
    }
    if (is_min && size > s.lcc) {
      s.lcc = size;
      best_root = i;
    }
  }
  if (s.lcc > 1) {
    double sum = 0.0;
    int pairs = 0;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (d[best_root][i] < inf && d[best_root][j] < inf) {
          sum += d[i][j];
          ++pairs;
        }
      }
    }
    s.cpl = sum / pairs;
  }

  std::vector<double> deg(n);
  for (int i = 0; i < n; ++i) deg[i] = a.row(i).sum();
  const double total = std::accumulate(deg.begin(), deg.end(), 0.0);
  s.mean_d = total / n;
  if (total > 0) {
    double diff = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) diff += std::abs(deg[i] - deg[j]);
    }
    s.gini = diff / (2.0 * n * total);
  }
  return s;
}

/// Central difference of f with respect to one scalar slot.
inline double central_difference(const std::function<double()>& f, double& slot, double h = 1e-6) {
  const double saved = slot;
  slot = saved + h;
  const double up = f();
  slot = saved - h;
  const double down = f();
  slot = saved;
  return (up - down) / (2.0 * h);
}

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)});
}

/// Checks every entry of `analytic` (gradient wrt `values`) against central
/// differences of f; returns the worst relative error among entries whose
/// magnitude exceeds `floor` (absolute error is used below it).
inline double worst_gradient_error(const std::function<double()>& f, ccgg::Matrix& values,
                                   const ccgg::Matrix& analytic, double h = 1e-6,
                                   double floor = 1e-6) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const double numeric = central_difference(f, values.data()[i], h);
    const double exact = analytic.data()[i];
    const double err = (std::abs(numeric) < floor && std::abs(exact) < floor)
                           ? std::abs(numeric - exact)
                           : relative_error(numeric, exact);
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace testing
