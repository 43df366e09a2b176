#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "json.hpp"

#include "ccgg/autodiff.hpp"
#include "ccgg/generator.hpp"
#include "ccgg/graph.hpp"
#include "ccgg/nn.hpp"

namespace ccgg {

struct GraphClassifierConfig {
  int num_classes = 2;
  int num_node_labels = 1;
  int width = 32;
  int layers = 3;

  nlohmann::json to_json() const;
  static GraphClassifierConfig from_json(const nlohmann::json& j);
};

/// Graph-level classifier: `layers` sample-and-aggregate convolutions
///   h' = relu(h W_self + b + wmean_j(h_j) W_neigh)
/// where wmean weights neighbors by (possibly relaxed) adjacency and divides
/// by the weight sum floored at 1. Mean pooling, then a 2-layer MLP whose
/// per-class outputs are squashed with a sigmoid.
///
/// Node input = [label features, log(1 + weighted degree)]. Label features are
/// one-hot for real graphs or uniform when labels are unknown.
class GraphClassifier {
 public:
  GraphClassifier(const GraphClassifierConfig& config, std::uint64_t seed);
  GraphClassifier(GraphClassifier&&) noexcept = default;
  GraphClassifier& operator=(GraphClassifier&&) noexcept = default;

  const GraphClassifierConfig& config() const { return config_; }
  ParamStore& params() { return *params_; }
  const ParamStore& params() const { return *params_; }

  struct Layer {
    Linear self;
    Linear neigh;
  };
  const std::vector<Layer>& conv_layers() const { return conv_; }
  const Mlp& head() const { return head_; }

 private:
  GraphClassifierConfig config_;
  std::unique_ptr<ParamStore> params_;
  std::vector<Layer> conv_;
  Mlp head_;
};

struct ClassProbabilities {
  Eigen::VectorXd scores;      // sigmoid outputs, each in [0, 1]
  Eigen::VectorXd normalized;  // scores / sum(scores)

  int predicted() const;
};

struct ClassifierOutput {
  ad::Var logits;          // 1 x m, pre-sigmoid
  ad::Var log_normalized;  // 1 x m

  ClassProbabilities probabilities() const;
};

inline constexpr double kAggregationFloor = 1.0;

Matrix adjacency_matrix(const Graph& g);
Matrix one_hot_features(const Graph& g, int num_node_labels);
Matrix uniform_features(int num_nodes, int num_node_labels);

/// Differentiable path; `adjacency` is n x n with entries in [0, 1].
ClassifierOutput classify_graph(ad::Tape& tape, const GraphClassifier& clf, ad::Var adjacency,
                                const Matrix& features);
/// Throws ArgumentError for adjacency entries outside [0, 1].
ClassProbabilities classify_graph(const GraphClassifier& clf, const Matrix& adjacency,
                                  const Matrix& features);
/// Discrete graph with one-hot node labels.
ClassProbabilities classify_graph(const GraphClassifier& clf, const Graph& g);

/// -log normalized[target].
ad::Var classification_cross_entropy(const ClassifierOutput& out, int target);

struct ClassifierTrainConfig {
  int epochs = 60;
  double lr = 5e-3;
  int batch_size = 16;
  int width = 32;
  /// Probability of replacing a training graph's label features with the
  /// uniform vector, so the classifier also copes with unlabeled prefixes.
  double uniform_feature_prob = 0.5;
  std::uint64_t seed = 0;
};

struct ClassifierTrainResult {
  GraphClassifier classifier;
  double best_validation_accuracy = 0.0;
  int best_epoch = 0;
  std::vector<double> validation_accuracy;  // per epoch
};

/// Cross-entropy training on discrete graphs; returns the parameters with the
/// best validation accuracy. Throws TrainingError with fewer than 2 classes.
ClassifierTrainResult train_graph_classifier(const DatasetSplit& data, int num_classes,
                                             int num_node_labels,
                                             const ClassifierTrainConfig& config);

double classifier_accuracy(const GraphClassifier& clf, const std::vector<Graph>& graphs);

struct NodeClassifierConfig {
  int input_dim = 80;
  int hidden = 256;
  int num_node_labels = 3;
};

/// Three-layer MLP (input -> hidden -> hidden -> labels) over final node states.
class NodeClassifier {
 public:
  NodeClassifier(const NodeClassifierConfig& config, std::uint64_t seed);
  NodeClassifier(NodeClassifier&&) noexcept = default;
  NodeClassifier& operator=(NodeClassifier&&) noexcept = default;

  const NodeClassifierConfig& config() const { return config_; }
  ParamStore& params() { return *params_; }
  const ParamStore& params() const { return *params_; }
  const Mlp& mlp() const { return mlp_; }

 private:
  NodeClassifierConfig config_;
  std::unique_ptr<ParamStore> params_;
  Mlp mlp_;
};

/// Per-node log-distributions (n x labels). Throws ArgumentError on width mismatch.
ad::Var classify_nodes(ad::Tape& tape, const NodeClassifier& clf, ad::Var states);
/// Per-node distributions, each row summing to 1.
Matrix classify_nodes(const NodeClassifier& clf, const Matrix& states);

}  // namespace ccgg
