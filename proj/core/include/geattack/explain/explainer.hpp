#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "geattack/gcn/gcn.hpp"
#include "geattack/graph/graph.hpp"

namespace geattack::explain {

using ad::DenseMatrix;
using ad::DiffValue;
using graph::Edge;

struct ExplainerConfig {
  double lr = 0.01;
  int steps = 100;
  std::uint64_t seed = 0;
  // Mask-size and mask-entropy penalties over the computation subgraph. Off by default.
  bool regularize = false;
  double size_coef = 0.005;
  double entropy_coef = 1.0;
};

/// Edge mask for one (node, class) pair. Used symmetrized: the weight of edge
/// (i, j) is sigmoid((mask[i][j] + mask[j][i]) / 2).
struct ExplanationMask {
  DenseMatrix mask;
  std::size_t node = 0;
  int target_class = 0;
  int steps = 0;
  double lr = 0.0;
  std::vector<double> loss_history;  // loss before each step, then the final loss

  double weight(std::size_t i, std::size_t j) const;
};

struct RankedEdge {
  Edge edge;
  double weight = 0.0;
};

struct Explanation {
  std::size_t node = 0;
  std::vector<RankedEdge> edges;  // descending weight, ties lexicographic
  std::vector<Edge> universe;     // computation-subgraph edges that were ranked

  std::set<std::size_t> nodes() const;
};

/// Seeded uniform [-0.1, 0.1] n x n mask.
DenseMatrix initial_mask(std::size_t n, std::uint64_t seed);

/// A ⊙ sigmoid((M + Mᵀ) / 2).
DiffValue masked_adjacency(const DiffValue& a, const DiffValue& m);

/// -ln f(A ⊙ σ(M_sym), X)_v^ŷ with the masked adjacency re-normalized.
DiffValue explainer_loss(const gcn::GcnModel& model, const DiffValue& a, const DiffValue& m,
                         const DiffValue& x, std::size_t v, int cls);

/// Same loss given the precomputed X W1.
DiffValue explainer_loss_projected(const gcn::GcnModel& model, const DiffValue& a,
                                   const DiffValue& m, const DiffValue& xw1, std::size_t v,
                                   int cls);

/// M - lr * dL/dM. With retain_graph the result stays differentiable w.r.t.
/// everything the loss depends on (in particular `a`); otherwise it is a fresh
/// constant on the same tape. `m` must require gradients.
DiffValue mask_step(const gcn::GcnModel& model, const DiffValue& a, const DiffValue& m,
                    const DiffValue& xw1, std::size_t v, int cls, double lr, bool retain_graph);

/// One step on a stored mask (no retention).
ExplanationMask mask_step(const ExplanationMask& state, const gcn::GcnModel& model,
                          const DenseMatrix& adjacency, const DenseMatrix& features);

/// `steps` plain gradient steps from initial_mask(n, seed). The optimisation
/// runs on v's 3-hop induced subgraph, which holds every entry the loss at v
/// depends on; mask entries outside it keep their initial values.
ExplanationMask fit_mask(const gcn::GcnModel& model, const graph::Graph& g, std::size_t v, int cls,
                         const ExplainerConfig& config);
ExplanationMask fit_mask(const gcn::GcnModel& model, const DenseMatrix& adjacency,
                         const DenseMatrix& features, std::size_t v, int cls,
                         const ExplainerConfig& config);

/// Top-L edges of v's 2-hop computation subgraph by symmetrized weight.
Explanation extract_explanation(const ExplanationMask& state, const DenseMatrix& adjacency,
                                std::size_t top_l);

/// 1 where the ranked edge is adversarial, in explanation order.
std::vector<int> detection_rank(const Explanation& expl, const std::vector<Edge>& adversarial);

/// [{source, target, weight, rank[, adversarial]}...]
std::string explanation_to_json(const Explanation& expl,
                                const std::optional<std::vector<Edge>>& adversarial = std::nullopt);

}  // namespace geattack::explain
