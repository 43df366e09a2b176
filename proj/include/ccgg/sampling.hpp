#pragma once

// Class-conditional generation at inference time: no relaxation, no graph
// classifier. Edges are drawn from the mixture of Bernoulli directly.

#include <cstdint>
#include <optional>
#include <vector>

#include "ccgg/classifiers.hpp"
#include "ccgg/generator.hpp"
#include "ccgg/graph.hpp"
#include "ccgg/rng.hpp"

namespace ccgg {

/// Draws a node count from the class's empirical histogram.
/// Throws ArgumentError for a class without mass, CapacityError if the
/// draw exceeds `max_nodes`.
int sample_num_nodes(int cls, const NodeCountHistogram& hist, int max_nodes, Rng& rng);

struct GenerateOptions {
  /// Generation starts from this graph's canonically ordered rows instead of
  /// the empty graph; its node labels are kept.
  std::optional<Graph> prefix;
};

/// One graph of class `cls`. Node labels are the argmax of the node
/// classifier on each block's final states.
Graph generate(int cls, const Generator& gen, const NodeClassifier& nodeclf,
               const NodeCountHistogram& hist, Rng& rng, const GenerateOptions& options = {});

/// Same, with a fixed node count.
Graph generate_with_size(int cls, int num_nodes, const Generator& gen,
                         const NodeClassifier& nodeclf, Rng& rng,
                         const GenerateOptions& options = {});

/// Sample `index` of a batch: uses substream (seed, cls, index).
Graph generate_one(int cls, std::size_t index, std::uint64_t seed, const Generator& gen,
                   const NodeClassifier& nodeclf, const NodeCountHistogram& hist,
                   const GenerateOptions& options = {});

/// `count` independent samples; parallel over samples, result order fixed.
std::vector<Graph> generate_batch(int cls, std::size_t count, std::uint64_t seed,
                                  const Generator& gen, const NodeClassifier& nodeclf,
                                  const NodeCountHistogram& hist,
                                  const GenerateOptions& options = {});

}  // namespace ccgg
