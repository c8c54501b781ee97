#include "geattack/graph/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <random>
#include <string>

namespace geattack::graph {

std::size_t Graph::num_edges() const {
  std::size_t count = 0;
  for (std::size_t i = 0; i < adjacency.rows(); ++i)
    for (std::size_t j = i + 1; j < adjacency.cols(); ++j)
      if (adjacency(i, j) != 0.0) ++count;
  return count;
}

std::vector<std::size_t> Graph::nodes_in(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == s) out.push_back(i);
  return out;
}

std::vector<std::size_t> Graph::neighbors(std::size_t v) const {
  if (v >= n()) throw GraphError("node " + std::to_string(v) + " out of range");
  std::vector<std::size_t> out;
  auto row = adjacency.row(v);
  for (std::size_t j = 0; j < row.size(); ++j)
    if (row[j] != 0.0) out.push_back(j);
  return out;
}

std::vector<Edge> Graph::edges() const {
  std::vector<Edge> out;
  for (std::size_t i = 0; i < adjacency.rows(); ++i)
    for (std::size_t j = i + 1; j < adjacency.cols(); ++j)
      if (adjacency(i, j) != 0.0) out.push_back({i, j});
  return out;
}

void validate(const Graph& g) {
  const std::size_t n = g.n();
  if (g.adjacency.rows() != n || g.adjacency.cols() != n)
    throw GraphError("adjacency is " + ad::shape_string(g.adjacency) + " for " +
                     std::to_string(n) + " labels");
  if (!g.features || g.features->rows() != n)
    throw GraphError("feature rows do not match node count " + std::to_string(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (g.adjacency(i, i) != 0.0) throw GraphError("self-loop at node " + std::to_string(i));
    for (std::size_t j = i + 1; j < n; ++j) {
      const double a = g.adjacency(i, j);
      if (a != g.adjacency(j, i))
        throw GraphError("asymmetric entry (" + std::to_string(i) + "," + std::to_string(j) + ")");
      if (a != 0.0 && a != 1.0)
        throw GraphError("non-binary entry (" + std::to_string(i) + "," + std::to_string(j) + ")");
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (g.labels[i] < 0 || g.labels[i] >= g.num_classes)
      throw GraphError("label of node " + std::to_string(i) + " outside [0, " +
                       std::to_string(g.num_classes) + ")");
  if (!g.split.empty() && g.split.size() != n)
    throw GraphError("split has " + std::to_string(g.split.size()) + " tags for " +
                     std::to_string(n) + " nodes");
}

Graph with_adjacency(const Graph& g, DenseMatrix adjacency) {
  if (adjacency.rows() != g.n() || adjacency.cols() != g.n())
    throw GraphError("with_adjacency: expected " + std::to_string(g.n()) + " square, got " +
                     ad::shape_string(adjacency));
  Graph out = g;
  out.adjacency = std::move(adjacency);
  return out;
}

Component largest_connected_component(const Graph& g) {
  const std::size_t n = g.n();
  if (n == 0) throw GraphError("largest_connected_component: empty graph");

  std::vector<std::ptrdiff_t> comp(n, -1);
  std::vector<std::size_t> best;
  std::ptrdiff_t next = 0;
  for (std::size_t s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    std::vector<std::size_t> members{s};
    comp[s] = next;
    for (std::size_t head = 0; head < members.size(); ++head) {
      auto row = g.adjacency.row(members[head]);
      for (std::size_t j = 0; j < n; ++j) {
        if (row[j] != 0.0 && comp[j] < 0) {
          comp[j] = next;
          members.push_back(j);
        }
      }
    }
    ++next;
    // Components are discovered by smallest member, so strict > keeps the
    // earliest on ties.
    if (members.size() > best.size()) best = std::move(members);
  }
  std::sort(best.begin(), best.end());

  Component out;
  out.new_to_old = best;
  out.old_to_new.assign(n, -1);
  for (std::size_t k = 0; k < best.size(); ++k) out.old_to_new[best[k]] = static_cast<std::ptrdiff_t>(k);

  const std::size_t m = best.size();
  Graph& h = out.graph;
  h.adjacency = induced_submatrix(g.adjacency, best);
  auto feats = std::make_shared<DenseMatrix>(m, g.features->cols());
  for (std::size_t k = 0; k < m; ++k) {
    auto src = g.features->row(best[k]);
    std::copy(src.begin(), src.end(), feats->row(k).begin());
  }
  h.features = std::move(feats);
  h.num_classes = g.num_classes;
  h.labels.resize(m);
  for (std::size_t k = 0; k < m; ++k) h.labels[k] = g.labels[best[k]];
  if (g.has_splits()) {
    h.split.resize(m);
    for (std::size_t k = 0; k < m; ++k) h.split[k] = g.split[best[k]];
  }
  return out;
}

Graph make_splits(const Graph& g, const SplitSpec& spec) {
  if (!(spec.train > 0.0) || !(spec.val > 0.0) || !(spec.train + spec.val < 1.0))
    throw GraphError("split fractions must be positive with train + val < 1");
  const std::size_t n = g.n();
  const auto n_train = static_cast<std::size_t>(std::llround(spec.train * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(spec.val * static_cast<double>(n)));
  if (n_train < 1 || n_val < 1 || n_train + n_val >= n)
    throw GraphError("graph with " + std::to_string(n) + " nodes is too small for the split");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(spec.seed);
  std::shuffle(order.begin(), order.end(), rng);

  Graph out = g;
  out.split.assign(n, Split::Test);
  for (std::size_t k = 0; k < n_train; ++k) out.split[order[k]] = Split::Train;
  for (std::size_t k = n_train; k < n_train + n_val; ++k) out.split[order[k]] = Split::Val;
  return out;
}

std::size_t node_degree(const DenseMatrix& adjacency, std::size_t v) {
  if (v >= adjacency.rows())
    throw GraphError("node " + std::to_string(v) + " out of range for " +
                     std::to_string(adjacency.rows()) + " nodes");
  std::size_t d = 0;
  for (double x : adjacency.row(v))
    if (x != 0.0) ++d;
  return d;
}

std::size_t node_degree(const Graph& g, std::size_t v) { return node_degree(g.adjacency, v); }

std::vector<std::size_t> k_hop_nodes(const DenseMatrix& adjacency, std::size_t v, int hops) {
  const std::size_t n = adjacency.rows();
  if (v >= n) throw GraphError("node " + std::to_string(v) + " out of range");
  std::vector<int> dist(n, -1);
  std::deque<std::size_t> queue{v};
  dist[v] = 0;
  while (!queue.empty()) {
    const std::size_t u = queue.front();
    queue.pop_front();
    if (dist[u] == hops) continue;
    auto row = adjacency.row(u);
    for (std::size_t j = 0; j < n; ++j) {
      if (row[j] != 0.0 && dist[j] < 0) {
        dist[j] = dist[u] + 1;
        queue.push_back(j);
      }
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i)
    if (dist[i] >= 0) out.push_back(i);
  return out;
}

std::vector<Edge> induced_edges(const DenseMatrix& adjacency, const std::vector<std::size_t>& nodes) {
  std::vector<std::size_t> sorted = nodes;
  std::sort(sorted.begin(), sorted.end());
  std::vector<Edge> out;
  for (std::size_t a = 0; a < sorted.size(); ++a)
    for (std::size_t b = a + 1; b < sorted.size(); ++b)
      if (adjacency(sorted[a], sorted[b]) != 0.0) out.push_back({sorted[a], sorted[b]});
  return out;
}

DenseMatrix induced_submatrix(const DenseMatrix& a, const std::vector<std::size_t>& nodes) {
  const std::size_t m = nodes.size();
  DenseMatrix out(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) out(i, j) = a(nodes[i], nodes[j]);
  return out;
}

std::vector<Edge> computation_edges(const DenseMatrix& adjacency, std::size_t v) {
  return induced_edges(adjacency, k_hop_nodes(adjacency, v, 2));
}

}  // namespace geattack::graph
