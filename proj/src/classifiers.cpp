#include "ccgg/classifiers.hpp"

#include <cmath>
#include <numeric>

#include "ccgg/errors.hpp"

namespace ccgg {

nlohmann::json GraphClassifierConfig::to_json() const {
  return {{"m", num_classes}, {"num_node_labels", num_node_labels}, {"width", width},
          {"layers", layers}};
}

GraphClassifierConfig GraphClassifierConfig::from_json(const nlohmann::json& j) {
  GraphClassifierConfig c;
  c.num_classes = j.at("m").get<int>();
  c.num_node_labels = j.at("num_node_labels").get<int>();
  c.width = j.at("width").get<int>();
  c.layers = j.at("layers").get<int>();
  return c;
}

GraphClassifier::GraphClassifier(const GraphClassifierConfig& config, std::uint64_t seed)
    : config_(config), params_(std::make_unique<ParamStore>()) {
  if (config_.num_classes < 1 || config_.num_node_labels < 1 || config_.width < 1 ||
      config_.layers < 1) {
    throw ArgumentError("invalid graph classifier config");
  }
  Rng rng(seed);
  Eigen::Index in = config_.num_node_labels + 1;
  for (int l = 0; l < config_.layers; ++l) {
    const std::string p = "clf/sage/" + std::to_string(l);
    conv_.push_back(Layer{Linear(*params_, p + "/self", in, config_.width, rng),
                          Linear(*params_, p + "/neigh", in, config_.width, rng)});
    in = config_.width;
  }
  head_ = Mlp(*params_, "clf/head", {config_.width, config_.width, config_.num_classes}, rng);
}

int ClassProbabilities::predicted() const {
  Eigen::Index best = 0;
  normalized.maxCoeff(&best);
  return static_cast<int>(best);
}

ClassProbabilities ClassifierOutput::probabilities() const {
  ClassProbabilities p;
  p.scores = logits.value()
                 .row(0)
                 .unaryExpr([](double z) { return 1.0 / (1.0 + std::exp(-z)); })
                 .transpose();
  p.normalized = log_normalized.value().row(0).array().exp().transpose();
  return p;
}

Matrix adjacency_matrix(const Graph& g) {
  Matrix a = Matrix::Zero(g.num_nodes(), g.num_nodes());
  for (const auto& [u, v] : g.edges()) {
    a(u, v) = 1.0;
    a(v, u) = 1.0;
  }
  return a;
}

Matrix one_hot_features(const Graph& g, int num_node_labels) {
  Matrix f = Matrix::Zero(g.num_nodes(), num_node_labels);
  for (int v = 0; v < g.num_nodes(); ++v) {
    const int label = g.node_labels()[v];
    if (label >= num_node_labels) {
      throw ArgumentError("node label " + std::to_string(label) + " outside vocabulary of " +
                          std::to_string(num_node_labels));
    }
    f(v, label) = 1.0;
  }
  return f;
}

Matrix uniform_features(int num_nodes, int num_node_labels) {
  return Matrix::Constant(num_nodes, num_node_labels, 1.0 / num_node_labels);
}

ClassifierOutput classify_graph(ad::Tape& tape, const GraphClassifier& clf, ad::Var adjacency,
                                const Matrix& features) {
  const auto n = adjacency.rows();
  if (adjacency.cols() != n) throw ArgumentError("adjacency must be square");
  if (features.rows() != n || features.cols() != clf.config().num_node_labels) {
    throw ArgumentError("feature matrix must be " + std::to_string(n) + " x " +
                        std::to_string(clf.config().num_node_labels));
  }
  if (n == 0) throw ArgumentError("cannot classify an empty graph");

  ad::Var degree = ad::sum_cols(adjacency);
  ad::Var denom = ad::clamp_min(degree, kAggregationFloor);
  ad::Var h = ad::concat_cols(tape.constant(features), ad::log1p(degree));
  for (const auto& layer : clf.conv_layers()) {
    ad::Var neighbor_mean = ad::div_col(ad::matmul(adjacency, h), denom);
    h = ad::relu(ad::add(layer.self(tape, h), layer.neigh(tape, neighbor_mean)));
  }
  ClassifierOutput out;
  out.logits = clf.head()(tape, ad::mean_rows(h));
  out.log_normalized = ad::log_softmax_rows(ad::log_sigmoid(out.logits));
  return out;
}

ClassProbabilities classify_graph(const GraphClassifier& clf, const Matrix& adjacency,
                                  const Matrix& features) {
  if ((adjacency.array() < 0.0).any() || (adjacency.array() > 1.0).any()) {
    throw ArgumentError("adjacency entries must lie in [0, 1]");
  }
  ad::Tape tape(false);
  return classify_graph(tape, clf, tape.constant(adjacency), features).probabilities();
}

ClassProbabilities classify_graph(const GraphClassifier& clf, const Graph& g) {
  return classify_graph(clf, adjacency_matrix(g), one_hot_features(g, clf.config().num_node_labels));
}

ad::Var classification_cross_entropy(const ClassifierOutput& out, int target) {
  if (target < 0 || target >= out.log_normalized.cols()) {
    throw ArgumentError("target class " + std::to_string(target) + " out of range");
  }
  return ad::neg(ad::pick(out.log_normalized, 0, target));
}

double classifier_accuracy(const GraphClassifier& clf, const std::vector<Graph>& graphs) {
  if (graphs.empty()) return 0.0;
  int correct = 0;
  for (const auto& g : graphs) correct += classify_graph(clf, g).predicted() == g.class_label();
  return static_cast<double>(correct) / static_cast<double>(graphs.size());
}

ClassifierTrainResult train_graph_classifier(const DatasetSplit& data, int num_classes,
                                             int num_node_labels,
                                             const ClassifierTrainConfig& config) {
  std::vector<int> seen(std::max(num_classes, 1), 0);
  for (const auto& g : data.train) {
    if (g.class_label() >= num_classes) throw ArgumentError("class label exceeds num_classes");
    seen[g.class_label()] = 1;
  }
  if (std::accumulate(seen.begin(), seen.end(), 0) < 2) {
    throw TrainingError("graph classifier needs at least two classes in the training split");
  }

  GraphClassifierConfig cc{num_classes, num_node_labels, config.width, 3};
  ClassifierTrainResult result{GraphClassifier(cc, substream_seed(config.seed, 0xC1F)), -1.0, 0, {}};
  GraphClassifier& clf = result.classifier;
  Adam adam(clf.params().pointers(), AdamOptions{.lr = config.lr});

  const auto& eval_set = data.validation.empty() ? data.train : data.validation;
  std::vector<Matrix> best;
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(substream_seed(config.seed, 0xE90C, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order.begin(), order.end());
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      GradientBuffer grads;
      for (std::size_t k = start; k < stop; ++k) {
        const Graph& g = data.train[order[k]];
        const bool uniform = rng.bernoulli(config.uniform_feature_prob);
        ad::Tape tape;
        Matrix features = uniform ? uniform_features(g.num_nodes(), num_node_labels)
                                  : one_hot_features(g, num_node_labels);
        auto out = classify_graph(tape, clf, tape.constant(adjacency_matrix(g)), features);
        ad::Var loss = classification_cross_entropy(out, g.class_label());
        tape.backward(loss);
        grads.add_tape(tape);
      }
      grads.scale(1.0 / static_cast<double>(stop - start));
      adam.step(grads);
    }
    const double acc = classifier_accuracy(clf, eval_set);
    result.validation_accuracy.push_back(acc);
    if (acc > result.best_validation_accuracy) {
      result.best_validation_accuracy = acc;
      result.best_epoch = epoch;
      best.clear();
      for (const auto& p : clf.params()) best.push_back(p.value);
    }
  }
  if (!best.empty()) {
    std::size_t i = 0;
    for (auto& p : clf.params()) p.value = best[i++];
  }
  return result;
}

NodeClassifier::NodeClassifier(const NodeClassifierConfig& config, std::uint64_t seed)
    : config_(config), params_(std::make_unique<ParamStore>()) {
  Rng rng(seed);
  mlp_ = Mlp(*params_, "nodeclf",
             {config_.input_dim, config_.hidden, config_.hidden, config_.num_node_labels}, rng);
}

ad::Var classify_nodes(ad::Tape& tape, const NodeClassifier& clf, ad::Var states) {
  if (states.cols() != clf.config().input_dim) {
    throw ArgumentError("node states have width " + std::to_string(states.cols()) +
                        ", node classifier expects " + std::to_string(clf.config().input_dim));
  }
  return ad::log_softmax_rows(clf.mlp()(tape, states));
}

Matrix classify_nodes(const NodeClassifier& clf, const Matrix& states) {
  ad::Tape tape(false);
  return classify_nodes(tape, clf, tape.constant(states)).value().array().exp().matrix();
}

}  // namespace ccgg
