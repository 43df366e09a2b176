#pragma once

// Loss assembly, straight-through Gumbel-softmax edge relaxation and the
// optimization loop for the generator and node classifier.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "json.hpp"

#include "ccgg/autodiff.hpp"
#include "ccgg/classifiers.hpp"
#include "ccgg/generator.hpp"
#include "ccgg/graph.hpp"
#include "ccgg/nn.hpp"
#include "ccgg/rng.hpp"

namespace ccgg {

struct TrainConfig {
  // Generator shape.
  int block_size = 1;   // B
  int max_nodes = 0;    // N; 0 = largest graph in the training split
  int num_mixtures = 5;  // K
  int rounds = 3;       // R
  int hidden_dim_h = 64;
  int cond_dim = 16;
  bool untie_rounds = false;
  int nodeclf_hidden = 256;

  // Objective.
  double gamma = 0.8;
  double lambda1 = 0.5;
  double lambda2 = 0.5;
  double tau = 1.0;        // initial Gumbel temperature
  double tau_final = 0.2;  // reached at the last epoch by exponential decay

  // Optimization.
  double lr = 1e-3;
  double grad_clip = 0.0;  // global norm; <= 0 disables
  int epochs = 50;
  int batch_size = 8;
  std::uint64_t seed = 0;

  // Graph classifier pretraining.
  int clf_epochs = 60;
  double clf_lr = 5e-3;
  int clf_batch_size = 16;
  int clf_width = 32;

  // Toy corpus node-count range.
  int toy_min_nodes = 6;
  int toy_max_nodes = 12;

  /// Throws ArgumentError on out-of-range values (gamma in (0, 1], tau > 0, ...).
  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys throw ArgumentError.
  static TrainConfig from_json(const nlohmann::json& j);

  GeneratorConfig generator_config(int num_classes, int max_nodes_resolved) const;
  /// Temperature at 0-based `epoch`.
  double temperature(int epoch) const;
};

struct LossBreakdown {
  double l_adj = 0.0;
  double l_condition = 0.0;
  double l_node_label = 0.0;
  double total = 0.0;

  static LossBreakdown make(double l_adj, double l_condition, double l_node_label, double lambda1,
                            double lambda2);
  nlohmann::json to_json() const;
  friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

inline constexpr double kEdgeProbClamp = 1e-6;

struct RelaxedEdge {
  std::uint8_t hard = 0;
  double soft = 0.5;
  /// d(soft)/d(log p - log(1 - p)).
  double dsoft_dlogit = 0.0;
};

/// Two-category Gumbel-softmax over {edge, no-edge} with logits
/// (log p, log(1 - p)) and noise -log(-log u). p is clamped to
/// [1e-6, 1 - 1e-6].
RelaxedEdge gumbel_softmax_edge(double p_edge, double tau, double u1, double u2);

/// Same sample driven by the edge logit; differentiable in `logits` (E x 1).
/// Forward value is the hard bit, backward follows the soft sample.
ad::Var gumbel_softmax_edges(ad::Var logits, double tau, std::span<const double> u1,
                             std::span<const double> u2);

/// Inverse-CDF draw from a categorical distribution (one uniform).
int sample_component(const Eigen::VectorXd& probs, Rng& rng);

struct RelaxedBlock {
  int component = 0;
  std::vector<std::uint8_t> hard;
  std::vector<double> soft;
  ad::Var bits;  // E x 1; set only by the differentiable overload
};

/// Categorical k ~ alpha, then one relaxed edge per candidate with p = theta(e, k).
RelaxedBlock sample_block_relaxed(const MixtureParams& mix, double tau, Rng& rng);
/// Differentiable version over raw head outputs; consumes the RNG identically.
RelaxedBlock sample_block_relaxed(ad::Tape& tape, const HeadOutputs& heads, double tau, Rng& rng);

/// gamma^(n_full - n_prefix).
double discount(int n_full, int n_prefix, double gamma);

/// -log probs.normalized[target], discounted.
double condition_loss(const ClassProbabilities& probs, int target, int n_full, int n_prefix,
                      double gamma);
ad::Var condition_loss(const ClassifierOutput& out, int target, int n_full, int n_prefix,
                       double gamma);

/// Mean cross-entropy of per-node distributions (rows) at `targets`, discounted.
double node_label_loss(const Matrix& node_dists, std::span<const int> targets, int n_full,
                       int n_prefix, double gamma);
/// `log_dists` holds per-node log-distributions.
ad::Var node_label_loss(ad::Var log_dists, std::span<const int> targets, int n_full, int n_prefix,
                        double gamma);

struct TrainingExample {
  OrderedGraph graph;
  int cls = 0;
};

/// Per-graph loss terms recorded on `tape`. `objective` is the differentiated
/// quantity: l_adj plus the lambda-weighted terms whose lambda is nonzero.
struct GraphLoss {
  ad::Var objective;
  LossBreakdown parts;
};

class Trainer {
 public:
  /// The graph classifier is frozen: its parameters are read, never written.
  Trainer(Generator& gen, NodeClassifier& nodeclf, const GraphClassifier& clf,
          const TrainConfig& config);

  GraphLoss graph_loss(ad::Tape& tape, const TrainingExample& ex, double tau, Rng& rng) const;

  /// One optimizer update over `batch`. Graph k draws its noise from
  /// substream (seed, stream, k). Returns the batch-mean breakdown.
  /// Throws NumericError naming the first non-finite term.
  LossBreakdown train_step(std::span<const TrainingExample> batch, double tau,
                           std::uint64_t stream);

  using EpochCallback = std::function<void(int epoch, const LossBreakdown&)>;
  /// Shuffled mini-batch epochs; returns the per-epoch mean breakdown.
  std::vector<LossBreakdown> fit(const std::vector<TrainingExample>& data,
                                 const EpochCallback& on_epoch = {});

  const TrainConfig& config() const { return config_; }

 private:
  Generator& gen_;
  NodeClassifier& nodeclf_;
  const GraphClassifier& clf_;
  TrainConfig config_;
  Adam adam_;
  int num_node_labels_;
};

/// Decomposes graphs under the canonical ordering for a generator of capacity N.
std::vector<TrainingExample> make_examples(const std::vector<Graph>& graphs, int block_size,
                                           int max_nodes);

}  // namespace ccgg
