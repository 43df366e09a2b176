#pragma once

// Class-conditional block generator: per-step initial node states from the
// rows generated so far plus a learned class embedding, R rounds of attentive
// message passing over the augmented graph, and mixture-of-Bernoulli heads.

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "json.hpp"

#include "ccgg/autodiff.hpp"
#include "ccgg/graph.hpp"
#include "ccgg/nn.hpp"

namespace ccgg {

struct GeneratorConfig {
  int block_size = 1;     // B
  int max_nodes = 16;     // N
  int num_mixtures = 20;  // K
  int rounds = 7;         // R
  int hidden_dim_h = 64;
  int cond_dim = 16;
  int num_classes = 2;    // m
  bool untie_rounds = false;

  int hidden_dim() const { return hidden_dim_h + cond_dim; }
  void validate() const;
  /// Archive header {B, N, K, R, hidden_dim_h, cond_dim, m, untie_rounds}.
  nlohmann::json to_json() const;
  static GeneratorConfig from_json(const nlohmann::json& j);
};

/// One-hot class vector of length m.
class ClassConditionVector {
 public:
  static ClassConditionVector one_hot(int cls, int num_classes);
  /// Throws ArgumentError unless `values` is exactly one-hot.
  static ClassConditionVector from_values(std::span<const double> values);

  int class_index() const { return cls_; }
  int num_classes() const { return static_cast<int>(row_.cols()); }
  const Matrix& row() const { return row_; }

 private:
  ClassConditionVector(int cls, Matrix row) : cls_(cls), row_(std::move(row)) {}
  int cls_;
  Matrix row_;
};

/// Node states of the augmented graph at one step: previously generated
/// nodes first, then the current block (flag x = 1).
struct NodeStates {
  ad::Var h;
  std::vector<std::uint8_t> x;

  int num_nodes() const { return static_cast<int>(x.size()); }
};

struct MixtureParams {
  Eigen::VectorXd alpha;  // K
  Matrix theta;           // candidates x K

  /// Throws ArgumentError if alpha is not a simplex or theta leaves (0, 1).
  void validate() const;
};

/// Augmented graph for one step: observed edges among the first
/// `num_prior` nodes plus every candidate edge touching the current block.
struct StepGraph {
  int num_prior = 0;
  int num_block = 0;
  std::vector<Edge> edges;       // undirected, message-passing support
  std::vector<Edge> candidates;  // (i, j) with i in block, j < i; row order of theta

  int num_nodes() const { return num_prior + num_block; }
  Block block() const { return {num_prior, num_prior + num_block}; }
};

StepGraph make_step_graph(std::span<const BitRow> prior_rows, int num_block);
std::vector<Edge> candidate_pairs(Block block);

/// Raw head outputs before normalization.
struct HeadOutputs {
  ad::Var alpha_logits;  // 1 x K
  ad::Var theta_logits;  // candidates x K

  MixtureParams mixture() const;
};

class Generator {
 public:
  Generator(const GeneratorConfig& config, std::uint64_t seed);
  Generator(Generator&&) noexcept = default;
  Generator& operator=(Generator&&) noexcept = default;

  const GeneratorConfig& config() const { return config_; }
  ParamStore& params() { return *params_; }
  const ParamStore& params() const { return *params_; }

  struct Round {
    Mlp message;    // f
    Mlp attention;  // g
    GruCell update;
  };

  const Parameter& row_weight() const { return *row_weight_; }
  const Parameter& row_bias() const { return *row_bias_; }
  const Parameter& cond_weight() const { return *cond_weight_; }
  const Parameter& cond_bias() const { return *cond_bias_; }
  const Round& round(int r) const { return rounds_[config_.untie_rounds ? r : 0]; }
  const Mlp& alpha_head() const { return alpha_head_; }
  const Mlp& theta_head() const { return theta_head_; }

 private:
  GeneratorConfig config_;
  std::unique_ptr<ParamStore> params_;
  Parameter* row_weight_;
  Parameter* row_bias_;
  Parameter* cond_weight_;
  Parameter* cond_bias_;
  std::vector<Round> rounds_;
  Mlp alpha_head_;
  Mlp theta_head_;
};

/// h0 = [W^h row + b^h, W^c c + b^c] for previously generated nodes and
/// [0, W^c c + b^c] for the `num_block` nodes of the current block.
NodeStates init_representations(ad::Tape& tape, const Generator& gen,
                                std::span<const BitRow> prior_rows, int num_block,
                                const ClassConditionVector& c);

/// One round of attentive message passing followed by the recurrent update.
NodeStates gnn_round(ad::Tape& tape, const Generator& gen, const NodeStates& states,
                     std::span<const Edge> aug_edges, int round);

/// alpha = softmax(sum over candidates of MLP_alpha(h_i - h_j)),
/// theta = sigmoid(MLP_theta(h_i - h_j)) for every candidate (i, j) of `block`.
HeadOutputs output_heads(ad::Tape& tape, const Generator& gen, const NodeStates& states,
                         Block block);

/// log sum_k alpha_k prod_e theta^b (1 - theta)^(1 - b), in log space.
double block_log_likelihood(const MixtureParams& mix, std::span<const std::uint8_t> bits);
ad::Var block_log_likelihood(const HeadOutputs& heads, std::span<const std::uint8_t> bits);

struct StepOutput {
  StepGraph graph;
  NodeStates final_states;
  HeadOutputs heads;
};

/// Full step: init, R rounds over the augmented graph, heads.
StepOutput run_step(ad::Tape& tape, const Generator& gen, std::span<const BitRow> prior_rows,
                    int num_block, const ClassConditionVector& c);

/// Ground-truth bits for the candidates of `step` from the ordered rows.
std::vector<std::uint8_t> observed_bits(const OrderedGraph& og, const StepGraph& step);

/// Teacher-forced log-likelihood, summed over blocks.
ad::Var graph_log_likelihood(ad::Tape& tape, const Generator& gen, const OrderedGraph& og,
                             const ClassConditionVector& c);
double graph_log_likelihood(const Generator& gen, const OrderedGraph& og,
                            const ClassConditionVector& c);

inline constexpr double kThetaEps = 1e-12;

}  // namespace ccgg
