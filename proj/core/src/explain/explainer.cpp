#include "geattack/explain/explainer.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <random>
#include <stdexcept>

#include "geattack/autodiff/kernels.hpp"
#include "geattack/autodiff/ops.hpp"

namespace geattack::explain {

namespace k = ad::kernels;

namespace {

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

/// Mask-size plus mean mask-entropy over the 0/1 edge indicator `universe`.
DiffValue regularizer(const DiffValue& m, const DenseMatrix& universe, const ExplainerConfig& cfg) {
  ad::Tape& t = m.tape();
  double count = 0;
  for (double x : universe.values()) count += x;
  DiffValue u = t.constant(universe);
  DiffValue s = ad::sigmoid(ad::symmetrize(m));
  DiffValue size = ad::scale(ad::sum(ad::mul(s, u)), cfg.size_coef);
  if (count == 0) return size;
  DiffValue one_minus = ad::add_scalar(ad::neg(s), 1.0);
  DiffValue ent = ad::neg(ad::add(ad::mul(s, ad::ln(ad::clamp_min(s, 1e-12))),
                                  ad::mul(one_minus, ad::ln(ad::clamp_min(one_minus, 1e-12)))));
  return ad::add(size, ad::scale(ad::sum(ad::mul(ent, u)), cfg.entropy_coef / count));
}

DenseMatrix edge_indicator(std::size_t n, const std::vector<Edge>& edges) {
  DenseMatrix u(n, n);
  for (const Edge& e : edges) u(e.u, e.v) = u(e.v, e.u) = 1.0;
  return u;
}

}  // namespace

double ExplanationMask::weight(std::size_t i, std::size_t j) const {
  return sigmoid(0.5 * (mask(i, j) + mask(j, i)));
}

std::set<std::size_t> Explanation::nodes() const {
  std::set<std::size_t> out;
  for (const auto& r : edges) {
    out.insert(r.edge.u);
    out.insert(r.edge.v);
  }
  return out;
}

DenseMatrix initial_mask(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  DenseMatrix m(n, n);
  for (double& x : m.values()) x = u(rng);
  return m;
}

DiffValue masked_adjacency(const DiffValue& a, const DiffValue& m) {
  return ad::mul(a, ad::sigmoid(ad::symmetrize(m)));
}

DiffValue explainer_loss(const gcn::GcnModel& model, const DiffValue& a, const DiffValue& m,
                         const DiffValue& x, std::size_t v, int cls) {
  return gcn::nll_loss(gcn::gcn_forward(model, masked_adjacency(a, m), x), v, cls);
}

DiffValue explainer_loss_projected(const gcn::GcnModel& model, const DiffValue& a,
                                   const DiffValue& m, const DiffValue& xw1, std::size_t v,
                                   int cls) {
  return gcn::nll_loss(gcn::node_probs(model, masked_adjacency(a, m), xw1, v), 0, cls);
}

DiffValue mask_step(const gcn::GcnModel& model, const DiffValue& a, const DiffValue& m,
                    const DiffValue& xw1, std::size_t v, int cls, double lr, bool retain_graph) {
  if (!m.requires_grad()) throw std::invalid_argument("mask_step: mask is not differentiable");
  ad::Tape& t = m.tape();
  DiffValue loss = explainer_loss_projected(model, a, m, xw1, v, cls);
  const DiffValue wrt[] = {m};
  if (retain_graph) return ad::sub(m, ad::scale(t.gradient(loss, wrt).front(), lr));
  DenseMatrix g = t.gradient_values(loss, wrt).front();
  return t.constant(k::sub(m.value(), k::scale(g, lr)));
}

ExplanationMask mask_step(const ExplanationMask& state, const gcn::GcnModel& model,
                          const DenseMatrix& adjacency, const DenseMatrix& features) {
  ad::Tape t;
  DiffValue m = t.variable(state.mask);
  DiffValue next = mask_step(model, t.constant(adjacency), m,
                             t.constant(gcn::input_projection(model, features)), state.node,
                             state.target_class, state.lr, false);
  ExplanationMask out = state;
  out.mask = next.value();
  out.steps += 1;
  return out;
}

ExplanationMask fit_mask(const gcn::GcnModel& model, const graph::Graph& g, std::size_t v, int cls,
                         const ExplainerConfig& config) {
  return fit_mask(model, g.adjacency, *g.features, v, cls, config);
}

ExplanationMask fit_mask(const gcn::GcnModel& model, const DenseMatrix& adjacency,
                         const DenseMatrix& features, std::size_t v, int cls,
                         const ExplainerConfig& config) {
  if (config.steps < 0) throw std::invalid_argument("fit_mask: negative step count");
  const std::size_t n = adjacency.rows();
  ExplanationMask state;
  state.mask = initial_mask(n, config.seed);
  state.node = v;
  state.target_class = cls;
  state.lr = config.lr;
  state.steps = config.steps;

  const auto nodes = graph::k_hop_nodes(adjacency, v, 3);
  const std::size_t local_v = static_cast<std::size_t>(
      std::lower_bound(nodes.begin(), nodes.end(), v) - nodes.begin());
  auto a_local = std::make_shared<const DenseMatrix>(graph::induced_submatrix(adjacency, nodes));
  DenseMatrix m_local = graph::induced_submatrix(state.mask, nodes);
  DenseMatrix x_local(nodes.size(), features.cols());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    auto src = features.row(nodes[i]);
    std::copy(src.begin(), src.end(), x_local.row(i).begin());
  }
  auto xw1 = std::make_shared<const DenseMatrix>(gcn::input_projection(model, x_local));
  DenseMatrix universe;
  if (config.regularize)
    universe = edge_indicator(nodes.size(), graph::computation_edges(*a_local, local_v));

  auto loss_of = [&](ad::Tape& t, const DiffValue& m) {
    DiffValue loss = explainer_loss_projected(model, t.constant(a_local), m, t.constant(xw1), local_v, cls);
    return config.regularize ? ad::add(loss, regularizer(m, universe, config)) : loss;
  };

  for (int step = 0; step <= config.steps; ++step) {
    ad::Tape t;
    DiffValue m = t.variable(m_local);
    DiffValue loss = loss_of(t, m);
    state.loss_history.push_back(loss.value().item());
    if (step == config.steps) break;
    const DiffValue wrt[] = {m};
    DenseMatrix grad = t.gradient_values(loss, wrt).front();
    m_local = k::sub(m_local, k::scale(grad, config.lr));
  }

  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (std::size_t j = 0; j < nodes.size(); ++j) state.mask(nodes[i], nodes[j]) = m_local(i, j);
  return state;
}

Explanation extract_explanation(const ExplanationMask& state, const DenseMatrix& adjacency,
                                std::size_t top_l) {
  Explanation out;
  out.node = state.node;
  out.universe = graph::computation_edges(adjacency, state.node);
  std::vector<RankedEdge> ranked;
  ranked.reserve(out.universe.size());
  for (const Edge& e : out.universe) ranked.push_back({e, state.weight(e.u, e.v)});
  std::stable_sort(ranked.begin(), ranked.end(), [](const RankedEdge& a, const RankedEdge& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return a.edge < b.edge;
  });
  if (ranked.size() > top_l) ranked.resize(top_l);
  out.edges = std::move(ranked);
  return out;
}

std::vector<int> detection_rank(const Explanation& expl, const std::vector<Edge>& adversarial) {
  std::set<Edge> adv;
  for (const Edge& e : adversarial) adv.insert(Edge::make(e.u, e.v));
  std::vector<int> rel;
  rel.reserve(expl.edges.size());
  for (const auto& r : expl.edges) rel.push_back(adv.count(r.edge) ? 1 : 0);
  return rel;
}

std::string explanation_to_json(const Explanation& expl,
                                const std::optional<std::vector<Edge>>& adversarial) {
  std::vector<int> rel;
  if (adversarial) rel = detection_rank(expl, *adversarial);
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t r = 0; r < expl.edges.size(); ++r) {
    nlohmann::json row = {{"source", expl.edges[r].edge.u},
                          {"target", expl.edges[r].edge.v},
                          {"weight", expl.edges[r].weight},
                          {"rank", r + 1}};
    if (adversarial) row["adversarial"] = rel[r] == 1;
    out.push_back(std::move(row));
  }
  return out.dump(2);
}

}  // namespace geattack::explain
