#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

#include "geattack/autodiff/dense_matrix.hpp"

namespace geattack::graph {

using ad::DenseMatrix;

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Split : std::uint8_t { Train, Val, Test };

/// Undirected edge, stored with u < v.
struct Edge {
  std::size_t u = 0;
  std::size_t v = 0;

  static Edge make(std::size_t a, std::size_t b) { return a < b ? Edge{a, b} : Edge{b, a}; }
  auto operator<=>(const Edge&) const = default;
};

struct Graph {
  DenseMatrix adjacency;  // n x n, symmetric {0,1}, zero diagonal
  std::shared_ptr<const DenseMatrix> features;
  std::vector<int> labels;
  int num_classes = 0;
  std::vector<Split> split;  // empty until splits are assigned

  std::size_t n() const noexcept { return labels.size(); }
  std::size_t num_edges() const;
  bool has_splits() const noexcept { return !split.empty(); }
  std::vector<std::size_t> nodes_in(Split s) const;
  std::vector<std::size_t> neighbors(std::size_t v) const;
  std::vector<Edge> edges() const;
};

/// Throws GraphError describing the first broken invariant.
void validate(const Graph& g);

/// Same features/labels/splits over a different adjacency.
Graph with_adjacency(const Graph& g, DenseMatrix adjacency);

struct Component {
  Graph graph;
  std::vector<std::ptrdiff_t> old_to_new;  // -1 for dropped nodes
  std::vector<std::size_t> new_to_old;
};

/// Induced subgraph on the largest connected component, ids compacted in
/// increasing original order. Ties go to the component holding the smallest id.
Component largest_connected_component(const Graph& g);

struct SplitSpec {
  double train = 0.1;
  double val = 0.1;
  std::uint64_t seed = 0;
};

/// Seeded shuffle; first train fraction -> Train, next val fraction -> Val,
/// rest -> Test.
Graph make_splits(const Graph& g, const SplitSpec& spec);

std::size_t node_degree(const Graph& g, std::size_t v);
std::size_t node_degree(const DenseMatrix& adjacency, std::size_t v);

/// Nodes within `hops` of v (including v), ascending.
std::vector<std::size_t> k_hop_nodes(const DenseMatrix& adjacency, std::size_t v, int hops);

/// Edges of `adjacency` with both endpoints in `nodes`, ascending.
std::vector<Edge> induced_edges(const DenseMatrix& adjacency, const std::vector<std::size_t>& nodes);

/// Submatrix a[nodes][nodes].
DenseMatrix induced_submatrix(const DenseMatrix& a, const std::vector<std::size_t>& nodes);

/// Edges of v's 2-hop computation subgraph.
std::vector<Edge> computation_edges(const DenseMatrix& adjacency, std::size_t v);

}  // namespace geattack::graph
