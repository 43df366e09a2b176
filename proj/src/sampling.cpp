#include "ccgg/sampling.hpp"

#include <numeric>
#include <string>

#include "ccgg/errors.hpp"
#include "ccgg/parallel.hpp"
#include "ccgg/training.hpp"

namespace ccgg {

int sample_num_nodes(int cls, const NodeCountHistogram& hist, int max_nodes, Rng& rng) {
  auto it = hist.find(cls);
  if (it == hist.end() || it->second.empty()) {
    throw ArgumentError("no node-count histogram for class " + std::to_string(cls));
  }
  long long total = 0;
  for (const auto& [n, count] : it->second) total += count;
  if (total <= 0) throw ArgumentError("empty node-count histogram for class " + std::to_string(cls));
  auto draw = rng.uniform_int(0, total - 1);
  int n = it->second.rbegin()->first;
  for (const auto& [size, count] : it->second) {
    if (draw < count) {
      n = size;
      break;
    }
    draw -= count;
  }
  if (n > max_nodes) {
    throw CapacityError("sampled node count " + std::to_string(n) + " exceeds N = " +
                        std::to_string(max_nodes));
  }
  return n;
}

Graph generate_with_size(int cls, int num_nodes, const Generator& gen,
                         const NodeClassifier& nodeclf, Rng& rng, const GenerateOptions& options) {
  const auto& cfg = gen.config();
  if (num_nodes < 1) throw ArgumentError("num_nodes must be >= 1");
  if (num_nodes > cfg.max_nodes) {
    throw CapacityError("requested " + std::to_string(num_nodes) + " nodes, N = " +
                        std::to_string(cfg.max_nodes));
  }
  const auto c = ClassConditionVector::one_hot(cls, cfg.num_classes);

  std::vector<BitRow> rows;
  std::vector<int> labels;
  if (options.prefix) {
    auto [og, part] = decompose(*options.prefix, cfg.block_size, cfg.max_nodes);
    if (og.num_nodes() > num_nodes) throw ArgumentError("prefix is larger than the requested graph");
    rows = og.lower_rows;
    labels = og.ordered_labels();
  }
  rows.reserve(static_cast<std::size_t>(num_nodes));

  for (int begin = static_cast<int>(rows.size()); begin < num_nodes; begin += cfg.block_size) {
    const int nb = std::min(cfg.block_size, num_nodes - begin);
    ad::Tape tape(false);
    StepOutput step = run_step(tape, gen, rows, nb, c);
    const MixtureParams mix = step.heads.mixture();
    const int k = sample_component(mix.alpha, rng);

    for (int i = 0; i < nb; ++i) rows.emplace_back(static_cast<std::size_t>(cfg.max_nodes), 0);
    for (std::size_t e = 0; e < step.graph.candidates.size(); ++e) {
      const auto [i, j] = step.graph.candidates[e];
      if (rng.bernoulli(mix.theta(static_cast<Eigen::Index>(e), k))) rows[i][j] = 1;
    }

    std::vector<int> block_rows(static_cast<std::size_t>(nb));
    std::iota(block_rows.begin(), block_rows.end(), begin);
    const Matrix probs = classify_nodes(
        nodeclf, ad::gather_rows(step.final_states.h, block_rows).value());
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
      Eigen::Index best = 0;
      probs.row(r).maxCoeff(&best);
      labels.push_back(static_cast<int>(best));
    }
  }

  std::vector<Edge> edges;
  for (int i = 0; i < num_nodes; ++i) {
    for (int j = 0; j < i; ++j) {
      if (rows[i][j]) edges.emplace_back(j, i);
    }
  }
  return Graph(num_nodes, std::move(edges), std::move(labels), cls);
}

Graph generate(int cls, const Generator& gen, const NodeClassifier& nodeclf,
               const NodeCountHistogram& hist, Rng& rng, const GenerateOptions& options) {
  const int n = sample_num_nodes(cls, hist, gen.config().max_nodes, rng);
  return generate_with_size(cls, n, gen, nodeclf, rng, options);
}

Graph generate_one(int cls, std::size_t index, std::uint64_t seed, const Generator& gen,
                   const NodeClassifier& nodeclf, const NodeCountHistogram& hist,
                   const GenerateOptions& options) {
  Rng rng(substream_seed(seed, static_cast<std::uint64_t>(cls), index));
  return generate(cls, gen, nodeclf, hist, rng, options);
}

std::vector<Graph> generate_batch(int cls, std::size_t count, std::uint64_t seed,
                                  const Generator& gen, const NodeClassifier& nodeclf,
                                  const NodeCountHistogram& hist, const GenerateOptions& options) {
  std::vector<std::optional<Graph>> slots(count);
  parallel_for(count, [&](std::size_t i) {
    slots[i] = generate_one(cls, i, seed, gen, nodeclf, hist, options);
  });
  std::vector<Graph> out;
  out.reserve(count);
  for (auto& g : slots) out.push_back(std::move(*g));
  return out;
}

}  // namespace ccgg
