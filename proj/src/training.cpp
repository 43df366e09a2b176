#include "ccgg/training.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <string>

#include "ccgg/errors.hpp"
#include "ccgg/parallel.hpp"

namespace ccgg {

namespace {

template <class T>
void read_into(const nlohmann::json& v, T& out, const std::string& key) {
  try {
    out = v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ArgumentError("config key '" + key + "' has the wrong type");
  }
}

double clamped_logit_bound() { return std::log((1.0 - kEdgeProbClamp) / kEdgeProbClamp); }

double gumbel_noise(double u) { return -std::log(-std::log(u)); }

void check_uniform(double u) {
  if (!(u > 0.0 && u < 1.0)) throw ArgumentError("uniform draw must lie in (0, 1)");
}

}  // namespace

void TrainConfig::validate() const {
  if (block_size < 1) throw ArgumentError("B must be >= 1");
  if (max_nodes < 0) throw ArgumentError("N must be >= 0");
  if (num_mixtures < 1) throw ArgumentError("K must be >= 1");
  if (rounds < 1) throw ArgumentError("R must be >= 1");
  if (hidden_dim_h < 1 || cond_dim < 1 || nodeclf_hidden < 1) {
    throw ArgumentError("hidden dims must be >= 1");
  }
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ArgumentError("gamma must lie in (0, 1]");
  if (lambda1 < 0.0 || lambda2 < 0.0) throw ArgumentError("lambda weights must be >= 0");
  if (!(tau > 0.0) || !(tau_final > 0.0)) throw ArgumentError("tau must be > 0");
  if (!(lr > 0.0) || !(clf_lr > 0.0)) throw ArgumentError("learning rates must be > 0");
  if (epochs < 0 || clf_epochs < 0) throw ArgumentError("epochs must be >= 0");
  if (batch_size < 1 || clf_batch_size < 1) throw ArgumentError("batch sizes must be >= 1");
  if (clf_width < 1) throw ArgumentError("clf_width must be >= 1");
  if (toy_min_nodes > toy_max_nodes) throw ArgumentError("toy node range is empty");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"B", block_size},
          {"N", max_nodes},
          {"K", num_mixtures},
          {"R", rounds},
          {"hidden_dim_h", hidden_dim_h},
          {"cond_dim", cond_dim},
          {"untie_rounds", untie_rounds},
          {"nodeclf_hidden", nodeclf_hidden},
          {"gamma", gamma},
          {"lambda1", lambda1},
          {"lambda2", lambda2},
          {"tau", tau},
          {"tau_final", tau_final},
          {"lr", lr},
          {"grad_clip", grad_clip},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"seed", seed},
          {"clf_epochs", clf_epochs},
          {"clf_lr", clf_lr},
          {"clf_batch_size", clf_batch_size},
          {"clf_width", clf_width},
          {"toy_min_nodes", toy_min_nodes},
          {"toy_max_nodes", toy_max_nodes}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ArgumentError("config must be a JSON object");
  TrainConfig c;
  const std::map<std::string, std::function<void(const nlohmann::json&, const std::string&)>>
      fields = {
          {"B", [&](auto& v, auto& k) { read_into(v, c.block_size, k); }},
          {"N", [&](auto& v, auto& k) { read_into(v, c.max_nodes, k); }},
          {"K", [&](auto& v, auto& k) { read_into(v, c.num_mixtures, k); }},
          {"R", [&](auto& v, auto& k) { read_into(v, c.rounds, k); }},
          {"hidden_dim_h", [&](auto& v, auto& k) { read_into(v, c.hidden_dim_h, k); }},
          {"cond_dim", [&](auto& v, auto& k) { read_into(v, c.cond_dim, k); }},
          {"untie_rounds", [&](auto& v, auto& k) { read_into(v, c.untie_rounds, k); }},
          {"nodeclf_hidden", [&](auto& v, auto& k) { read_into(v, c.nodeclf_hidden, k); }},
          {"gamma", [&](auto& v, auto& k) { read_into(v, c.gamma, k); }},
          {"lambda1", [&](auto& v, auto& k) { read_into(v, c.lambda1, k); }},
          {"lambda2", [&](auto& v, auto& k) { read_into(v, c.lambda2, k); }},
          {"tau", [&](auto& v, auto& k) { read_into(v, c.tau, k); }},
          {"tau_final", [&](auto& v, auto& k) { read_into(v, c.tau_final, k); }},
          {"lr", [&](auto& v, auto& k) { read_into(v, c.lr, k); }},
          {"grad_clip", [&](auto& v, auto& k) { read_into(v, c.grad_clip, k); }},
          {"epochs", [&](auto& v, auto& k) { read_into(v, c.epochs, k); }},
          {"batch_size", [&](auto& v, auto& k) { read_into(v, c.batch_size, k); }},
          {"seed", [&](auto& v, auto& k) { read_into(v, c.seed, k); }},
          {"clf_epochs", [&](auto& v, auto& k) { read_into(v, c.clf_epochs, k); }},
          {"clf_lr", [&](auto& v, auto& k) { read_into(v, c.clf_lr, k); }},
          {"clf_batch_size", [&](auto& v, auto& k) { read_into(v, c.clf_batch_size, k); }},
          {"clf_width", [&](auto& v, auto& k) { read_into(v, c.clf_width, k); }},
          {"toy_min_nodes", [&](auto& v, auto& k) { read_into(v, c.toy_min_nodes, k); }},
          {"toy_max_nodes", [&](auto& v, auto& k) { read_into(v, c.toy_max_nodes, k); }},
      };
  for (const auto& [key, value] : j.items()) {
    auto it = fields.find(key);
    if (it == fields.end()) throw ArgumentError("unknown config key '" + key + "'");
    it->second(value, key);
  }
  c.validate();
  return c;
}

GeneratorConfig TrainConfig::generator_config(int num_classes, int max_nodes_resolved) const {
  GeneratorConfig g;
  g.block_size = block_size;
  g.max_nodes = max_nodes_resolved;
  g.num_mixtures = num_mixtures;
  g.rounds = rounds;
  g.hidden_dim_h = hidden_dim_h;
  g.cond_dim = cond_dim;
  g.num_classes = num_classes;
  g.untie_rounds = untie_rounds;
  g.validate();
  return g;
}

double TrainConfig::temperature(int epoch) const {
  if (epochs <= 1) return tau;
  const double frac = static_cast<double>(epoch) / static_cast<double>(epochs - 1);
  return tau * std::pow(tau_final / tau, std::clamp(frac, 0.0, 1.0));
}

LossBreakdown LossBreakdown::make(double l_adj, double l_condition, double l_node_label,
                                  double lambda1, double lambda2) {
  return {l_adj, l_condition, l_node_label, l_adj + lambda1 * l_condition + lambda2 * l_node_label};
}

nlohmann::json LossBreakdown::to_json() const {
  return {{"l_adj", l_adj},
          {"l_condition", l_condition},
          {"l_node_label", l_node_label},
          {"total", total}};
}

RelaxedEdge gumbel_softmax_edge(double p_edge, double tau, double u1, double u2) {
  if (!(tau > 0.0)) throw ArgumentError("tau must be > 0");
  check_uniform(u1);
  check_uniform(u2);
  const double p = std::clamp(p_edge, kEdgeProbClamp, 1.0 - kEdgeProbClamp);
  const double z = std::log(p) - std::log1p(-p);
  const double y = (z + gumbel_noise(u1) - gumbel_noise(u2)) / tau;
  RelaxedEdge r;
  r.soft = 1.0 / (1.0 + std::exp(-y));
  r.hard = r.soft >= 0.5 ? 1 : 0;
  r.dsoft_dlogit = r.soft * (1.0 - r.soft) / tau;
  return r;
}

ad::Var gumbel_softmax_edges(ad::Var logits, double tau, std::span<const double> u1,
                             std::span<const double> u2) {
  if (!(tau > 0.0)) throw ArgumentError("tau must be > 0");
  const auto e = logits.rows();
  if (logits.cols() != 1 || static_cast<Eigen::Index>(u1.size()) != e ||
      static_cast<Eigen::Index>(u2.size()) != e) {
    throw ArgumentError("gumbel_softmax_edges: shape mismatch");
  }
  Matrix noise(e, 1);
  for (Eigen::Index i = 0; i < e; ++i) {
    check_uniform(u1[i]);
    check_uniform(u2[i]);
    noise(i, 0) = gumbel_noise(u1[i]) - gumbel_noise(u2[i]);
  }
  const double bound = clamped_logit_bound();
  ad::Var z = ad::clamp(logits, -bound, bound);
  ad::Var soft = ad::sigmoid(ad::scale(ad::add(z, logits.tape()->constant(std::move(noise))), 1.0 / tau));
  Matrix hard = (soft.value().array() >= 0.5).cast<double>().matrix();
  return ad::straight_through(soft, std::move(hard));
}

int sample_component(const Eigen::VectorXd& probs, Rng& rng) {
  const double u = rng.uniform() * probs.sum();
  double acc = 0.0;
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    acc += probs(k);
    if (u < acc) return static_cast<int>(k);
  }
  // Rounding can leave u just above the running sum; take the last positive mass.
  for (Eigen::Index k = probs.size() - 1; k >= 0; --k) {
    if (probs(k) > 0.0) return static_cast<int>(k);
  }
  throw ArgumentError("categorical distribution has no mass");
}

RelaxedBlock sample_block_relaxed(const MixtureParams& mix, double tau, Rng& rng) {
  mix.validate();
  RelaxedBlock out;
  out.component = sample_component(mix.alpha, rng);
  const auto e = mix.theta.rows();
  out.hard.resize(static_cast<std::size_t>(e));
  out.soft.resize(static_cast<std::size_t>(e));
  for (Eigen::Index i = 0; i < e; ++i) {
    const double u1 = rng.uniform();
    const double u2 = rng.uniform();
    const auto r = gumbel_softmax_edge(mix.theta(i, out.component), tau, u1, u2);
    out.hard[i] = r.hard;
    out.soft[i] = r.soft;
  }
  return out;
}

RelaxedBlock sample_block_relaxed(ad::Tape& tape, const HeadOutputs& heads, double tau, Rng& rng) {
  const Matrix& a = heads.alpha_logits.value();
  const Eigen::VectorXd alpha = (a.row(0).array() - a.maxCoeff()).exp().transpose();
  RelaxedBlock out;
  out.component = sample_component(alpha / alpha.sum(), rng);
  const auto e = heads.theta_logits.rows();
  std::vector<double> u1(static_cast<std::size_t>(e));
  std::vector<double> u2(static_cast<std::size_t>(e));
  for (Eigen::Index i = 0; i < e; ++i) {
    u1[i] = rng.uniform();
    u2[i] = rng.uniform();
  }
  if (e == 0) {
    out.bits = tape.constant(Matrix::Zero(0, 1));
    return out;
  }
  out.bits = gumbel_softmax_edges(ad::select_col(heads.theta_logits, out.component), tau, u1, u2);
  const Matrix& hard = out.bits.value();
  out.hard.resize(static_cast<std::size_t>(e));
  out.soft.resize(static_cast<std::size_t>(e));
  const double bound = clamped_logit_bound();
  for (Eigen::Index i = 0; i < e; ++i) {
    out.hard[i] = hard(i, 0) != 0.0;
    const double z = std::clamp(heads.theta_logits.value()(i, out.component), -bound, bound);
    const double y = (z + gumbel_noise(u1[i]) - gumbel_noise(u2[i])) / tau;
    out.soft[i] = 1.0 / (1.0 + std::exp(-y));
  }
  return out;
}

double discount(int n_full, int n_prefix, double gamma) {
  if (n_prefix > n_full) throw ArgumentError("prefix larger than the full graph");
  if (n_prefix < 0) throw ArgumentError("negative prefix size");
  return std::pow(gamma, n_full - n_prefix);
}

double condition_loss(const ClassProbabilities& probs, int target, int n_full, int n_prefix,
                      double gamma) {
  if (target < 0 || target >= probs.normalized.size()) {
    throw ArgumentError("target class " + std::to_string(target) + " out of range");
  }
  const double w = discount(n_full, n_prefix, gamma);
  return w * -std::log(probs.normalized(target));
}

ad::Var condition_loss(const ClassifierOutput& out, int target, int n_full, int n_prefix,
                       double gamma) {
  const double w = discount(n_full, n_prefix, gamma);
  return ad::scale(classification_cross_entropy(out, target), w);
}

double node_label_loss(const Matrix& node_dists, std::span<const int> targets, int n_full,
                       int n_prefix, double gamma) {
  if (static_cast<Eigen::Index>(targets.size()) != node_dists.rows()) {
    throw ArgumentError("node_label_loss: " + std::to_string(targets.size()) + " targets for " +
                        std::to_string(node_dists.rows()) + " nodes");
  }
  const double w = discount(n_full, n_prefix, gamma);
  if (targets.empty()) return 0.0;
  double ce = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] < 0 || targets[i] >= node_dists.cols()) {
      throw ArgumentError("node label target out of range");
    }
    ce -= std::log(node_dists(static_cast<Eigen::Index>(i), targets[i]));
  }
  return w * ce / static_cast<double>(targets.size());
}

ad::Var node_label_loss(ad::Var log_dists, std::span<const int> targets, int n_full, int n_prefix,
                        double gamma) {
  if (static_cast<Eigen::Index>(targets.size()) != log_dists.rows()) {
    throw ArgumentError("node_label_loss: " + std::to_string(targets.size()) + " targets for " +
                        std::to_string(log_dists.rows()) + " nodes");
  }
  const double w = discount(n_full, n_prefix, gamma);
  if (targets.empty()) return log_dists.tape()->constant(Matrix::Zero(1, 1));
  Matrix mask = Matrix::Zero(log_dists.rows(), log_dists.cols());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] < 0 || targets[i] >= log_dists.cols()) {
      throw ArgumentError("node label target out of range");
    }
    mask(static_cast<Eigen::Index>(i), targets[i]) = 1.0;
  }
  ad::Var picked = ad::sum(ad::mul(log_dists, log_dists.tape()->constant(std::move(mask))));
  return ad::scale(picked, -w / static_cast<double>(targets.size()));
}

std::vector<TrainingExample> make_examples(const std::vector<Graph>& graphs, int block_size,
                                           int max_nodes) {
  std::vector<TrainingExample> out;
  out.reserve(graphs.size());
  for (const auto& g : graphs) {
    out.push_back({decompose(g, block_size, max_nodes).first, g.class_label()});
  }
  return out;
}

namespace {

std::vector<Parameter*> trainable(Generator& gen, NodeClassifier& nodeclf) {
  auto ps = gen.params().pointers();
  auto qs = nodeclf.params().pointers();
  ps.insert(ps.end(), qs.begin(), qs.end());
  return ps;
}

}  // namespace

Trainer::Trainer(Generator& gen, NodeClassifier& nodeclf, const GraphClassifier& clf,
                 const TrainConfig& config)
    : gen_(gen),
      nodeclf_(nodeclf),
      clf_(clf),
      config_(config),
      adam_(trainable(gen, nodeclf), AdamOptions{.lr = config.lr, .clip_norm = config.grad_clip}),
      num_node_labels_(nodeclf.config().num_node_labels) {
  config_.validate();
  if (nodeclf.config().input_dim != gen.config().hidden_dim()) {
    throw ArgumentError("node classifier input width does not match generator hidden width");
  }
  if (clf.config().num_classes != gen.config().num_classes) {
    throw ArgumentError("graph classifier and generator disagree on the number of classes");
  }
}

GraphLoss Trainer::graph_loss(ad::Tape& tape, const TrainingExample& ex, double tau,
                              Rng& rng) const {
  for (const auto& p : clf_.params()) tape.freeze(p);

  const OrderedGraph& og = ex.graph;
  const int n = og.num_nodes();
  const auto c = ClassConditionVector::one_hot(ex.cls, gen_.config().num_classes);
  const auto labels = og.ordered_labels();
  const int clf_labels = clf_.config().num_node_labels;
  const auto part = BlockPartition::make(n, gen_.config().block_size);

  ad::Var zero = tape.constant(Matrix::Zero(1, 1));
  ad::Var log_lik = zero;
  ad::Var cond = zero;
  ad::Var node = zero;
  for (const auto& block : part.blocks) {
    std::span<const BitRow> prior(og.lower_rows.data(), static_cast<std::size_t>(block.begin));
    StepOutput step = run_step(tape, gen_, prior, block.size(), c);
    log_lik = ad::add(log_lik, block_log_likelihood(step.heads, observed_bits(og, step.graph)));

    // Relaxed sample of the block, spliced into the teacher-forced prefix.
    const int n_prefix = block.end;
    RelaxedBlock relaxed = sample_block_relaxed(tape, step.heads, tau, rng);
    Matrix base = Matrix::Zero(n_prefix, n_prefix);
    for (int i = 0; i < block.begin; ++i) {
      for (int j = 0; j < i; ++j) {
        if (og.lower_rows[i][j]) base(i, j) = base(j, i) = 1.0;
      }
    }
    std::vector<ad::Placement> placements;
    placements.reserve(2 * step.graph.candidates.size());
    for (std::size_t e = 0; e < step.graph.candidates.size(); ++e) {
      const auto [i, j] = step.graph.candidates[e];
      const auto k = static_cast<Eigen::Index>(e);
      placements.push_back({k, i, j});
      placements.push_back({k, j, i});
    }
    ad::Var adj = placements.empty() ? tape.constant(std::move(base))
                                     : ad::place_entries(std::move(base), relaxed.bits, placements);
    auto out = classify_graph(tape, clf_, adj, uniform_features(n_prefix, clf_labels));
    cond = ad::add(cond, condition_loss(out, ex.cls, n, n_prefix, config_.gamma));

    std::vector<int> rows(static_cast<std::size_t>(block.size()));
    std::iota(rows.begin(), rows.end(), block.begin);
    ad::Var log_dists = classify_nodes(tape, nodeclf_, ad::gather_rows(step.final_states.h, rows));
    std::vector<int> targets(labels.begin() + block.begin, labels.begin() + block.end);
    for (int t : targets) {
      if (t >= num_node_labels_) throw ArgumentError("node label outside node classifier vocabulary");
    }
    node = ad::add(node, node_label_loss(log_dists, targets, n, n_prefix, config_.gamma));
  }

  GraphLoss gl;
  gl.objective = ad::neg(log_lik);
  if (config_.lambda1 > 0.0) gl.objective = ad::add(gl.objective, ad::scale(cond, config_.lambda1));
  if (config_.lambda2 > 0.0) gl.objective = ad::add(gl.objective, ad::scale(node, config_.lambda2));
  gl.parts = LossBreakdown::make(-log_lik.scalar(), cond.scalar(), node.scalar(), config_.lambda1,
                                 config_.lambda2);
  return gl;
}

LossBreakdown Trainer::train_step(std::span<const TrainingExample> batch, double tau,
                                  std::uint64_t stream) {
  if (batch.empty()) throw ArgumentError("train_step: empty batch");
  std::vector<GradientBuffer> grads(batch.size());
  std::vector<LossBreakdown> parts(batch.size());
  parallel_for(batch.size(), [&](std::size_t k) {
    ad::Tape tape;
    Rng rng(substream_seed(config_.seed, stream, k));
    GraphLoss gl = graph_loss(tape, batch[k], tau, rng);
    const std::pair<const char*, double> terms[] = {{"l_adj", gl.parts.l_adj},
                                                    {"l_condition", gl.parts.l_condition},
                                                    {"l_node_label", gl.parts.l_node_label}};
    for (const auto& [name, value] : terms) {
      if (!std::isfinite(value)) {
        throw NumericError(std::string("non-finite ") + name + " (" + std::to_string(value) +
                           ") on graph " + std::to_string(k) + " of the batch");
      }
    }
    tape.backward(gl.objective);
    grads[k].add_tape(tape);
    parts[k] = gl.parts;
  });

  GradientBuffer total;
  double l_adj = 0.0;
  double l_cond = 0.0;
  double l_node = 0.0;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    total.merge(grads[k]);
    l_adj += parts[k].l_adj;
    l_cond += parts[k].l_condition;
    l_node += parts[k].l_node_label;
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  total.scale(inv);
  for (const auto& [p, g] : total.entries()) {
    if (!g.allFinite()) throw NumericError("non-finite gradient for parameter " + p->name);
  }
  adam_.step(total);
  return LossBreakdown::make(l_adj * inv, l_cond * inv, l_node * inv, config_.lambda1,
                             config_.lambda2);
}

std::vector<LossBreakdown> Trainer::fit(const std::vector<TrainingExample>& data,
                                        const EpochCallback& on_epoch) {
  if (data.empty()) throw TrainingError("no training graphs");
  std::vector<LossBreakdown> history;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const auto bs = static_cast<std::size_t>(config_.batch_size);
  for (int epoch = 0; epoch < config_.epochs; ++epoch) {
    Rng shuffler(substream_seed(config_.seed, 0x5EED5, static_cast<std::uint64_t>(epoch)));
    shuffler.shuffle(order.begin(), order.end());
    const double tau = config_.temperature(epoch);
    double l_adj = 0.0;
    double l_cond = 0.0;
    double l_node = 0.0;
    std::vector<TrainingExample> batch;
    for (std::size_t start = 0, b = 0; start < order.size(); start += bs, ++b) {
      const std::size_t stop = std::min(order.size(), start + bs);
      batch.clear();
      for (std::size_t k = start; k < stop; ++k) batch.push_back(data[order[k]]);
      const auto stream = (static_cast<std::uint64_t>(epoch) << 32) | b;
      const auto lb = train_step(batch, tau, stream);
      const auto w = static_cast<double>(stop - start);
      l_adj += w * lb.l_adj;
      l_cond += w * lb.l_condition;
      l_node += w * lb.l_node_label;
    }
    const double inv = 1.0 / static_cast<double>(data.size());
    history.push_back(LossBreakdown::make(l_adj * inv, l_cond * inv, l_node * inv, config_.lambda1,
                                          config_.lambda2));
    if (on_epoch) on_epoch(epoch, history.back());
  }
  return history;
}

}  // namespace ccgg
