#include "geattack/attack/attack.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <nlohmann/json.hpp>
#include <random>
#include <set>
#include <spdlog/spdlog.h>

#include "geattack/autodiff/ops.hpp"

namespace geattack::attack {

namespace {

using ad::DiffValue;
using ad::Tape;

std::vector<std::size_t> open_positions(const DenseMatrix& a, std::size_t v, std::optional<int> label_filter,
                                        const std::vector<int>* labels) {
  std::vector<std::size_t> out;
  for (std::size_t u = 0; u < a.cols(); ++u) {
    if (u == v || a(v, u) != 0.0) continue;
    if (label_filter && (*labels)[u] != *label_filter) continue;
    out.push_back(u);
  }
  return out;
}

void require_finite(const std::vector<double>& q, const char* method, std::size_t v, std::size_t step) {
  for (std::size_t j = 0; j < q.size(); ++j) {
    if (!std::isfinite(q[j]))
      throw std::runtime_error(std::string(method) + ": non-finite gradient at entry (" + std::to_string(v) + ", " +
                               std::to_string(j) + ") on outer step " + std::to_string(step) + " for target " +
                               std::to_string(v));
  }
}

void check_target(const graph::Graph& g, const AttackSpec& spec) {
  if (spec.target >= g.n()) throw std::out_of_range("attack target " + std::to_string(spec.target) + " out of range");
}

int require_target_label(const graph::Graph& g, const AttackSpec& spec, int original, const char* method,
                         bool must_differ = true) {
  if (!spec.target_label) throw std::invalid_argument(std::string(method) + " needs a target label");
  const int y = *spec.target_label;
  if (y < 0 || y >= g.num_classes)
    throw std::invalid_argument(std::string(method) + ": target label " + std::to_string(y) + " out of range");
  if (must_differ && y == original)
    throw std::invalid_argument(std::string(method) + ": target label equals the current prediction");
  return y;
}

AttackOutcome start(const char* method, const gcn::GcnModel& model, const graph::Graph& g, const AttackSpec& spec) {
  check_target(g, spec);
  AttackOutcome out;
  out.method = method;
  out.target = spec.target;
  out.original_label = gcn::predict(model, g, spec.target).label;
  out.target_label = spec.target_label;
  out.adjacency = g.adjacency;
  return out;
}

void adopt(AttackOutcome& out, std::size_t j) {
  const std::size_t v = out.target;
  out.adjacency(v, j) = out.adjacency(j, v) = 1.0;
  out.added.push_back(Edge::make(v, j));
}

void finish(AttackOutcome& out, const gcn::GcnModel& model, const graph::Graph& g) {
  const auto probs = gcn::node_probs_values(model, out.adjacency, gcn::input_projection(model, *g.features),
                                            out.target);
  out.final_label = gcn::argmax_row(probs, 0);
  out.success = out.final_label != out.original_label;
  out.success_t = out.target_label && out.final_label == *out.target_label;
}

bool goal_reached(const AttackOutcome& out, const gcn::GcnModel& model, const DenseMatrix& xw1) {
  const int label = gcn::argmax_row(gcn::node_probs_values(model, out.adjacency, xw1, out.target), 0);
  return out.target_label ? label == *out.target_label : label != out.original_label;
}

/// Greedy gradient attack shared by FGA, FGA-T and FGA-T&E.
AttackOutcome gradient_attack(const char* method, const gcn::GcnModel& model, const graph::Graph& g,
                              const AttackSpec& spec, int loss_label, PickMode mode,
                              const std::set<std::size_t>& excluded, AttackOutcome out) {
  const std::size_t v = spec.target;
  const std::size_t budget = resolve_budget(g, spec);
  const DenseMatrix xw1 = gcn::input_projection(model, *g.features);
  for (std::size_t step = 0; step < budget; ++step) {
    auto cands = open_positions(out.adjacency, v, std::nullopt, nullptr);
    std::erase_if(cands, [&](std::size_t u) { return excluded.count(u) > 0; });
    if (cands.empty()) {
      out.exhausted = true;
      break;
    }
    const auto grad = nll_row_gradient(model, out.adjacency, xw1, v, loss_label);
    require_finite(grad.q, method, v, step);
    const Edge e = edge_pick(grad.q, v, cands, mode);
    const std::size_t j = e.u == v ? e.v : e.u;
    out.steps.push_back({e, grad.q[j], grad.l_gnn, 0.0});
    adopt(out, j);
    if (spec.early_stop && goal_reached(out, model, xw1)) break;
  }
  finish(out, model, g);
  return out;
}

}  // namespace

std::vector<int> visible_labels(const gcn::GcnModel& model, const graph::Graph& g) {
  std::vector<int> labels = gcn::predict_labels(model, g.adjacency, *g.features);
  if (g.has_splits())
    for (std::size_t u : g.nodes_in(graph::Split::Train)) labels[u] = g.labels[u];
  return labels;
}

std::vector<std::size_t> candidate_set(const DenseMatrix& adjacency, std::size_t v, std::optional<int> label_filter,
                                       const std::vector<int>* labels) {
  if (v >= adjacency.rows()) throw std::out_of_range("candidate_set: node " + std::to_string(v) + " out of range");
  if (label_filter && (!labels || labels->size() != adjacency.rows()))
    throw std::invalid_argument("candidate_set: a label filter needs one label per node");
  auto out = open_positions(adjacency, v, label_filter, labels);
  if (out.empty()) throw ExhaustedCandidates("no candidate endpoints left for node " + std::to_string(v));
  return out;
}

namespace {

template <class Value>
Edge pick_extreme(Value value, std::size_t v, const std::vector<std::size_t>& candidates, PickMode mode) {
  if (candidates.empty()) throw ExhaustedCandidates("edge_pick: empty candidate set");
  std::vector<std::size_t> sorted = candidates;
  std::sort(sorted.begin(), sorted.end());
  std::size_t best = sorted.front();
  double best_q = value(best);
  for (std::size_t j : sorted) {
    const double s = value(j);
    if (mode == PickMode::Min ? s < best_q : s > best_q) {
      best = j;
      best_q = s;
    }
  }
  return Edge::make(v, best);
}

}  // namespace

Edge edge_pick(const DenseMatrix& q, std::size_t v, const std::vector<std::size_t>& candidates, PickMode mode) {
  return pick_extreme([&](std::size_t j) { return 0.5 * (q(v, j) + q(j, v)); }, v, candidates, mode);
}

Edge edge_pick(const std::vector<double>& q_sym, std::size_t v, const std::vector<std::size_t>& candidates,
               PickMode mode) {
  return pick_extreme([&](std::size_t j) { return q_sym.at(j); }, v, candidates, mode);
}

std::size_t resolve_budget(const graph::Graph& g, const AttackSpec& spec) {
  return spec.budget ? *spec.budget : graph::node_degree(g, spec.target);
}

DenseMatrix penalty_mask(const DenseMatrix& adjacency) {
  const std::size_t n = adjacency.rows();
  DenseMatrix b(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) b(i, j) = i == j ? 0.0 : 1.0 - adjacency(i, j);
  return b;
}

DenseMatrix nll_gradient(const gcn::GcnModel& model, const DenseMatrix& adjacency, const DenseMatrix& xw1,
                         std::size_t v, int label, double* loss_out) {
  Tape t;
  DiffValue a = t.variable(adjacency);
  DiffValue loss = gcn::nll_loss(gcn::node_probs(model, a, t.constant(xw1), v), 0, label);
  if (loss_out) *loss_out = loss.value().item();
  const DiffValue wrt[] = {a};
  return std::move(t.gradient_values(loss, wrt).front());
}

GeattackTerms geattack_objective(const gcn::GcnModel& model, const DiffValue& a, const DiffValue& xw1,
                                 const DenseMatrix& penalty, const DenseMatrix& mask0, std::size_t v,
                                 int target_label, double lambda, int inner_steps, double inner_lr) {
  if (inner_steps < 0) throw std::invalid_argument("geattack: negative inner step count");
  Tape& t = a.tape();
  GeattackTerms out;
  out.mask = t.variable(mask0);
  for (int s = 0; s < inner_steps; ++s)
    out.mask = explain::mask_step(model, a, out.mask, xw1, v, target_label, inner_lr, true);
  out.l_gnn = gcn::nll_loss(gcn::node_probs(model, a, xw1, v), 0, target_label);
  DenseMatrix b_row(1, penalty.cols());
  std::copy(penalty.row(v).begin(), penalty.row(v).end(), b_row.row(0).begin());
  out.l_expl = ad::sum(ad::mul(ad::select_row(out.mask, v), t.constant(std::move(b_row))));
  out.total = ad::add(out.l_gnn, ad::scale(out.l_expl, lambda));
  return out;
}

GeattackGradient geattack_gradient(const gcn::GcnModel& model, const DenseMatrix& adjacency,
                                   const DenseMatrix& xw1, const DenseMatrix& penalty, const DenseMatrix& mask0,
                                   std::size_t v, int target_label, double lambda, int inner_steps,
                                   double inner_lr) {
  Tape t;
  DiffValue a = t.variable(adjacency);
  auto terms = geattack_objective(model, a, t.constant(xw1), penalty, mask0, v, target_label, lambda,
                                  inner_steps, inner_lr);
  GeattackGradient out;
  out.l_gnn = terms.l_gnn.value().item();
  out.l_expl = terms.l_expl.value().item();
  const DiffValue wrt[] = {a};
  out.q = std::move(t.gradient_values(terms.total, wrt).front());
  return out;
}

AttackOutcome rna_attack(const gcn::GcnModel& model, const graph::Graph& g, const AttackSpec& spec) {
  AttackOutcome out = start("rna", model, g, spec);
  const int y = require_target_label(g, spec, out.original_label, "rna", false);
  const std::size_t budget = resolve_budget(g, spec);
  const auto labels = visible_labels(model, g);
  auto cands = open_positions(g.adjacency, spec.target, y, &labels);
  std::mt19937_64 rng(spec.seed);
  std::shuffle(cands.begin(), cands.end(), rng);
  if (cands.size() < budget) out.exhausted = true;
  const DenseMatrix xw1 = gcn::input_projection(model, *g.features);
  for (std::size_t k = 0; k < std::min(budget, cands.size()); ++k) {
    out.steps.push_back({Edge::make(spec.target, cands[k]), 0.0, 0.0, 0.0});
    adopt(out, cands[k]);
    if (spec.early_stop && goal_reached(out, model, xw1)) break;
  }
  finish(out, model, g);
  return out;
}

AttackOutcome fga_attack(const gcn::GcnModel& model, const graph::Graph& g, const AttackSpec& spec) {
  AttackOutcome out = start("fga", model, g, spec);
  out.target_label.reset();
  AttackSpec untargeted = spec;
  untargeted.target_label.reset();
  return gradient_attack("fga", model, g, untargeted, out.original_label, PickMode::Max, {}, std::move(out));
}

AttackOutcome fga_t_attack(const gcn::GcnModel& model, const graph::Graph& g, const AttackSpec& spec) {
  AttackOutcome out = start("fga-t", model, g, spec);
  const int y = require_target_label(g, spec, out.original_label, "fga-t");
  return gradient_attack("fga-t", model, g, spec, y, spec.pick, {}, std::move(out));
}

AttackOutcome fga_te_attack(const gcn::GcnModel& model, const graph::Graph& g, const AttackSpec& spec,
                            const explain::ExplainerConfig& explainer, std::size_t top_l) {
  AttackOutcome out = start("fga-te", model, g, spec);
  const int y = require_target_label(g, spec, out.original_label, "fga-te");
  std::set<std::size_t> excluded;
  if (top_l > 0) {
    auto mask = explain::fit_mask(model, g, spec.target, out.original_label, explainer);
    excluded = explain::extract_explanation(mask, g.adjacency, top_l).nodes();
  }
  return gradient_attack("fga-te", model, g, spec, y, spec.pick, excluded, std::move(out));
}

AttackOutcome geattack(const gcn::GcnModel& model, const graph::Graph& g, const AttackSpec& spec) {
  AttackOutcome out = start("geattack", model, g, spec);
  const int y = require_target_label(g, spec, out.original_label, "geattack");
  if (!std::isfinite(spec.lambda) || spec.lambda < 0.0) throw std::invalid_argument("geattack: lambda must be finite and >= 0");
  const std::size_t v = spec.target;
  const std::size_t n = g.n();
  const std::size_t budget = resolve_budget(g, spec);
  const DenseMatrix xw1 = gcn::input_projection(model, *g.features);
  const DenseMatrix mask0 = explain::initial_mask(n, spec.seed);

  for (std::size_t step = 0; step < budget; ++step) {
    const auto cands = open_positions(out.adjacency, v, std::nullopt, nullptr);
    if (cands.empty()) {
      out.exhausted = true;
      break;
    }
    const DenseMatrix& m0 = spec.reinit_mask && step > 0 ? explain::initial_mask(n, spec.seed + step) : mask0;
    const auto grad = geattack_row_gradient(model, out.adjacency, xw1, m0, v, y, spec.lambda, spec.inner_steps,
                                            spec.inner_lr);
    require_finite(grad.q, "geattack", v, step);
    const Edge e = edge_pick(grad.q, v, cands, spec.pick);
    const std::size_t j = e.u == v ? e.v : e.u;
    out.steps.push_back({e, grad.q[j], grad.l_gnn, grad.l_expl});
    adopt(out, j);
    spdlog::debug("geattack: target {} step {} adds ({}, {}) l_gnn {:.6g} l_expl {:.6g}", v, step, e.u, e.v,
                  grad.l_gnn, grad.l_expl);
    if (spec.early_stop && goal_reached(out, model, xw1)) break;
  }
  finish(out, model, g);
  return out;
}

std::string outcome_to_json(const AttackOutcome& o) {
  nlohmann::json j;
  j["method"] = o.method;
  j["target"] = o.target;
  j["original_label"] = o.original_label;
  j["target_label"] = o.target_label ? nlohmann::json(*o.target_label) : nlohmann::json(nullptr);
  j["final_label"] = o.final_label;
  j["edges"] = nlohmann::json::array();
  for (const Edge& e : o.added) j["edges"].push_back({o.target, e.u == o.target ? e.v : e.u});
  j["success"] = o.success;
  j["success_t"] = o.success_t;
  j["exhausted"] = o.exhausted;
  j["per_step"] = nlohmann::json::array();
  for (const StepLog& s : o.steps)
    j["per_step"].push_back({{"edge", {s.edge.u, s.edge.v}}, {"grad", s.grad}, {"l_gnn", s.l_gnn}, {"l_expl", s.l_expl}});
  return j.dump(2);
}

AttackOutcome run_attack(const std::string& method, const gcn::GcnModel& model, const graph::Graph& g,
                         const AttackSpec& spec, const explain::ExplainerConfig& explainer, std::size_t top_l) {
  if (method == "rna") return rna_attack(model, g, spec);
  if (method == "fga") return fga_attack(model, g, spec);
  if (method == "fga-t") return fga_t_attack(model, g, spec);
  if (method == "fga-te") return fga_te_attack(model, g, spec, explainer, top_l);
  if (method == "geattack") return geattack(model, g, spec);
  throw std::invalid_argument("unknown attack method '" + method + "' (rna, fga, fga-t, fga-te, geattack)");
}

std::string to_string(PickMode m) { return m == PickMode::Min ? "min" : "max"; }

PickMode pick_mode_from_string(const std::string& s) {
  if (s == "min") return PickMode::Min;
  if (s == "max") return PickMode::Max;
  throw std::invalid_argument("pick mode must be 'min' or 'max', got '" + s + "'");
}

}  // namespace geattack::attack
