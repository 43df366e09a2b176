#include "ccgg/generator.hpp"

#include <cmath>

#include "ccgg/errors.hpp"

namespace ccgg {

void GeneratorConfig::validate() const {
  if (block_size < 1) throw ArgumentError("block_size must be >= 1");
  if (max_nodes < 1) throw ArgumentError("max_nodes must be >= 1");
  if (num_mixtures < 1) throw ArgumentError("num_mixtures (K) must be >= 1");
  if (rounds < 1) throw ArgumentError("rounds (R) must be >= 1");
  if (hidden_dim_h < 1 || cond_dim < 1) throw ArgumentError("hidden dims must be >= 1");
  if (num_classes < 1) throw ArgumentError("num_classes must be >= 1");
}

nlohmann::json GeneratorConfig::to_json() const {
  return {{"B", block_size},         {"N", max_nodes},       {"K", num_mixtures},
          {"R", rounds},             {"hidden_dim_h", hidden_dim_h},
          {"cond_dim", cond_dim},    {"m", num_classes},     {"untie_rounds", untie_rounds}};
}

GeneratorConfig GeneratorConfig::from_json(const nlohmann::json& j) {
  GeneratorConfig c;
  c.block_size = j.at("B").get<int>();
  c.max_nodes = j.at("N").get<int>();
  c.num_mixtures = j.at("K").get<int>();
  c.rounds = j.at("R").get<int>();
  c.hidden_dim_h = j.at("hidden_dim_h").get<int>();
  c.cond_dim = j.at("cond_dim").get<int>();
  c.num_classes = j.at("m").get<int>();
  c.untie_rounds = j.value("untie_rounds", false);
  c.validate();
  return c;
}

ClassConditionVector ClassConditionVector::one_hot(int cls, int num_classes) {
  if (cls < 0 || cls >= num_classes) {
    throw ArgumentError("class " + std::to_string(cls) + " outside [0, " +
                        std::to_string(num_classes) + ")");
  }
  Matrix row = Matrix::Zero(1, num_classes);
  row(0, cls) = 1.0;
  return {cls, std::move(row)};
}

ClassConditionVector ClassConditionVector::from_values(std::span<const double> values) {
  int hot = -1;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] == 1.0 && hot < 0) {
      hot = static_cast<int>(i);
    } else if (values[i] != 0.0) {
      throw ArgumentError("condition vector is not one-hot");
    }
  }
  if (hot < 0) throw ArgumentError("condition vector is not one-hot");
  return one_hot(hot, static_cast<int>(values.size()));
}

void MixtureParams::validate() const {
  if (alpha.size() < 1) throw ArgumentError("empty mixture");
  if (std::abs(alpha.sum() - 1.0) > 1e-6 || (alpha.array() < 0.0).any()) {
    throw ArgumentError("alpha is not a probability simplex");
  }
  if (theta.cols() != alpha.size()) throw ArgumentError("theta/alpha component mismatch");
  if ((theta.array() <= 0.0).any() || (theta.array() >= 1.0).any()) {
    throw ArgumentError("theta outside (0, 1)");
  }
}

std::vector<Edge> candidate_pairs(Block block) {
  std::vector<Edge> out;
  for (int i = block.begin; i < block.end; ++i) {
    for (int j = 0; j < i; ++j) out.emplace_back(i, j);
  }
  return out;
}

StepGraph make_step_graph(std::span<const BitRow> prior_rows, int num_block) {
  StepGraph s;
  s.num_prior = static_cast<int>(prior_rows.size());
  s.num_block = num_block;
  for (int i = 0; i < s.num_prior; ++i) {
    for (int j = 0; j < i; ++j) {
      if (prior_rows[i][j]) s.edges.emplace_back(i, j);
    }
  }
  s.candidates = candidate_pairs(s.block());
  s.edges.insert(s.edges.end(), s.candidates.begin(), s.candidates.end());
  return s;
}

MixtureParams HeadOutputs::mixture() const {
  MixtureParams mix;
  const Matrix& a = alpha_logits.value();
  const double mx = a.maxCoeff();
  Eigen::VectorXd e = (a.row(0).array() - mx).exp().transpose();
  mix.alpha = e / e.sum();
  mix.theta = theta_logits.value()
                  .unaryExpr([](double z) { return 1.0 / (1.0 + std::exp(-z)); })
                  .cwiseMax(kThetaEps)
                  .cwiseMin(1.0 - kThetaEps);
  return mix;
}

Generator::Generator(const GeneratorConfig& config, std::uint64_t seed)
    : config_(config), params_(std::make_unique<ParamStore>()) {
  config_.validate();
  Rng rng(seed);
  const Eigen::Index hd = config_.hidden_dim();
  row_weight_ = &params_->add("gen/Wh", he_uniform(config_.max_nodes, config_.hidden_dim_h, rng));
  row_bias_ = &params_->add("gen/bh", Matrix::Zero(1, config_.hidden_dim_h));
  cond_weight_ = &params_->add("gen/Wc", he_uniform(config_.num_classes, config_.cond_dim, rng));
  cond_bias_ = &params_->add("gen/bc", Matrix::Zero(1, config_.cond_dim));
  const int distinct = config_.untie_rounds ? config_.rounds : 1;
  for (int r = 0; r < distinct; ++r) {
    const std::string p = "gen/gnn/" + std::to_string(r);
    rounds_.push_back(Round{Mlp(*params_, p + "/msg", {hd, hd, hd}, rng),
                            Mlp(*params_, p + "/att", {hd + 1, hd, 1}, rng),
                            GruCell(*params_, p + "/gru", hd, hd, rng)});
  }
  alpha_head_ = Mlp(*params_, "gen/heads/alpha", {hd, hd, config_.num_mixtures}, rng);
  theta_head_ = Mlp(*params_, "gen/heads/theta", {hd, hd, config_.num_mixtures}, rng);
}

NodeStates init_representations(ad::Tape& tape, const Generator& gen,
                                std::span<const BitRow> prior_rows, int num_block,
                                const ClassConditionVector& c) {
  const auto& cfg = gen.config();
  if (c.num_classes() != cfg.num_classes) {
    throw ArgumentError("condition vector has " + std::to_string(c.num_classes()) +
                        " classes, generator expects " + std::to_string(cfg.num_classes));
  }
  if (num_block < 1) throw ArgumentError("block must contain at least one node");
  const int prior = static_cast<int>(prior_rows.size());
  const int n = prior + num_block;
  if (n > cfg.max_nodes) throw CapacityError("step exceeds max_nodes");

  ad::Var block_part = tape.constant(Matrix::Zero(num_block, cfg.hidden_dim_h));
  ad::Var structure = block_part;
  if (prior > 0) {
    Matrix rows(prior, cfg.max_nodes);
    for (int i = 0; i < prior; ++i) {
      if (static_cast<int>(prior_rows[i].size()) != cfg.max_nodes) {
        throw ArgumentError("lower row length must equal max_nodes");
      }
      for (int j = 0; j < cfg.max_nodes; ++j) rows(i, j) = prior_rows[i][j];
    }
    ad::Var h_prior = ad::add_row(ad::matmul(tape.constant(std::move(rows)), tape.param(gen.row_weight())),
                                  tape.param(gen.row_bias()));
    structure = ad::concat_rows(h_prior, block_part);
  }
  ad::Var c_hat = ad::add_row(ad::matmul(tape.constant(c.row()), tape.param(gen.cond_weight())),
                              tape.param(gen.cond_bias()));
  ad::Var c_all = ad::matmul(tape.constant(Matrix::Ones(n, 1)), c_hat);

  NodeStates s;
  s.h = ad::concat_cols(structure, c_all);
  s.x.assign(n, 0);
  for (int i = prior; i < n; ++i) s.x[i] = 1;
  return s;
}

NodeStates gnn_round(ad::Tape& tape, const Generator& gen, const NodeStates& states,
                     std::span<const Edge> aug_edges, int round) {
  const auto& layer = gen.round(round);
  const int n = states.num_nodes();
  std::vector<int> recv;
  std::vector<int> send;
  recv.reserve(2 * aug_edges.size());
  send.reserve(2 * aug_edges.size());
  for (const auto& [u, v] : aug_edges) {
    recv.push_back(u);
    send.push_back(v);
    recv.push_back(v);
    send.push_back(u);
  }
  Matrix flags(n, 1);
  for (int i = 0; i < n; ++i) flags(i, 0) = states.x[i];
  ad::Var h_tilde = ad::concat_cols(states.h, tape.constant(std::move(flags)));

  ad::Var diff = ad::sub(ad::gather_rows(states.h, recv), ad::gather_rows(states.h, send));
  ad::Var messages = layer.message(tape, diff);
  ad::Var diff_tilde = ad::sub(ad::gather_rows(h_tilde, recv), ad::gather_rows(h_tilde, send));
  ad::Var attention = ad::sigmoid(layer.attention(tape, diff_tilde));
  ad::Var aggregated = ad::scatter_add_rows(ad::mul_col(messages, attention), recv, n);

  return NodeStates{layer.update(tape, aggregated, states.h), states.x};
}

HeadOutputs output_heads(ad::Tape& tape, const Generator& gen, const NodeStates& states,
                         Block block) {
  if (block.size() <= 0) throw ArgumentError("output_heads: empty block");
  if (block.end > states.num_nodes()) throw ArgumentError("output_heads: block outside states");
  std::vector<int> rows_i;
  std::vector<int> rows_j;
  for (const auto& [i, j] : candidate_pairs(block)) {
    rows_i.push_back(i);
    rows_j.push_back(j);
  }
  ad::Var diff = ad::sub(ad::gather_rows(states.h, rows_i), ad::gather_rows(states.h, rows_j));
  HeadOutputs out;
  if (rows_i.empty()) {
    out.alpha_logits = tape.constant(Matrix::Zero(1, gen.config().num_mixtures));
  } else {
    out.alpha_logits = ad::sum_rows(gen.alpha_head()(tape, diff));
  }
  out.theta_logits = gen.theta_head()(tape, diff);
  return out;
}

double block_log_likelihood(const MixtureParams& mix, std::span<const std::uint8_t> bits) {
  if (static_cast<Eigen::Index>(bits.size()) != mix.theta.rows()) {
    throw ArgumentError("block_log_likelihood: " + std::to_string(bits.size()) + " bits for " +
                        std::to_string(mix.theta.rows()) + " candidate edges");
  }
  if (mix.theta.cols() != mix.alpha.size()) throw ArgumentError("theta/alpha component mismatch");
  const Eigen::Index k_count = mix.alpha.size();
  Eigen::VectorXd per_k(k_count);
  for (Eigen::Index k = 0; k < k_count; ++k) {
    double acc = std::log(mix.alpha(k));
    for (Eigen::Index e = 0; e < mix.theta.rows(); ++e) {
      const double th = mix.theta(e, k);
      acc += bits[static_cast<std::size_t>(e)] ? std::log(th) : std::log1p(-th);
    }
    per_k(k) = acc;
  }
  const double mx = per_k.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((per_k.array() - mx).exp().sum());
}

ad::Var block_log_likelihood(const HeadOutputs& heads, std::span<const std::uint8_t> bits) {
  std::vector<double> b(bits.begin(), bits.end());
  // (1 x K): sum over candidates of each component's Bernoulli log-prob.
  ad::Var per_k = ad::sum_rows(ad::bernoulli_log_prob(heads.theta_logits, b));
  if (b.empty()) per_k = heads.alpha_logits.tape()->constant(Matrix::Zero(1, heads.alpha_logits.cols()));
  return ad::logsumexp_rows(ad::add(ad::log_softmax_rows(heads.alpha_logits), per_k));
}

StepOutput run_step(ad::Tape& tape, const Generator& gen, std::span<const BitRow> prior_rows,
                    int num_block, const ClassConditionVector& c) {
  StepOutput out;
  out.graph = make_step_graph(prior_rows, num_block);
  NodeStates s = init_representations(tape, gen, prior_rows, num_block, c);
  for (int r = 0; r < gen.config().rounds; ++r) s = gnn_round(tape, gen, s, out.graph.edges, r);
  out.final_states = s;
  out.heads = output_heads(tape, gen, s, out.graph.block());
  return out;
}

std::vector<std::uint8_t> observed_bits(const OrderedGraph& og, const StepGraph& step) {
  std::vector<std::uint8_t> bits;
  bits.reserve(step.candidates.size());
  for (const auto& [i, j] : step.candidates) bits.push_back(og.lower_rows[i][j]);
  return bits;
}

ad::Var graph_log_likelihood(ad::Tape& tape, const Generator& gen, const OrderedGraph& og,
                             const ClassConditionVector& c) {
  const auto& cfg = gen.config();
  if (og.num_nodes() > cfg.max_nodes || og.max_nodes != cfg.max_nodes) {
    throw CapacityError("ordered graph does not fit the generator capacity");
  }
  const auto part = BlockPartition::make(og.num_nodes(), cfg.block_size);
  ad::Var total = tape.constant(Matrix::Zero(1, 1));
  for (const auto& block : part.blocks) {
    std::span<const BitRow> prior(og.lower_rows.data(), static_cast<std::size_t>(block.begin));
    StepOutput step = run_step(tape, gen, prior, block.size(), c);
    total = ad::add(total, block_log_likelihood(step.heads, observed_bits(og, step.graph)));
  }
  return total;
}

double graph_log_likelihood(const Generator& gen, const OrderedGraph& og,
                            const ClassConditionVector& c) {
  ad::Tape tape(false);
  return graph_log_likelihood(tape, gen, og, c).scalar();
}

}  // namespace ccgg
