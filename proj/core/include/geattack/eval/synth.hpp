#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "geattack/graph/graph.hpp"

namespace geattack::eval {

struct CliqueBlocksParams {
  std::size_t k = 2;          // blocks (= classes)
  std::size_t m = 20;         // nodes per block
  double intra_p = 1.0;       // edge probability inside a block
  std::size_t bridges = 1;    // edges between each pair of consecutive blocks
  std::size_t pendants = 0;   // degree-1 nodes hung off each block
  double feature_noise = 0.0; // chance a node's one-hot names a random block
  double train = 0.1;
  double val = 0.1;
};

struct PlantedMotifParams {
  std::size_t background = 40;
  std::size_t anchors = 6;
  std::size_t spokes = 2;            // anchor-adjacent nodes per anchor
  double background_p = 0.04;        // edge probability among background nodes
  std::size_t target_noise = 1;      // background neighbors of every spoke
  std::size_t noise_dims = 0;        // random binary feature columns
  double anchor_value = 1.0;         // anchor-indicator feature value
  double train = 0.3;
  double val = 0.2;
};

struct SynthGraph {
  graph::Graph graph;
  // planted_motif only: the target and its single anchor neighbor
  std::optional<std::size_t> target;
  std::optional<std::size_t> anchor;
};

/// k cliques of m nodes, consecutive blocks joined by sparse bridges,
/// one-hot block features, labels = block ids. Splits are stratified by block.
SynthGraph clique_blocks(const CliqueBlocksParams& p, std::uint64_t seed);

/// Labels: 1 for anchors and nodes adjacent to an anchor, 0 otherwise.
/// Features: [1, anchor_value * is_anchor, noise...]. The target is a spoke touching exactly
/// one anchor, so removing that edge changes its label under the generating
/// rule.
/// Node ids are shuffled; the target is always in the test split.
SynthGraph planted_motif(const PlantedMotifParams& p, std::uint64_t seed);

/// "clique_blocks:k=3,m=10,pendants=2" or "planted_motif:background=30".
SynthGraph synth_from_spec(const std::string& spec, std::uint64_t seed);

}  // namespace geattack::eval
