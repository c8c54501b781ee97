#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "geattack/explain/explainer.hpp"
#include "geattack/gcn/gcn.hpp"
#include "geattack/graph/graph.hpp"

namespace geattack::attack {

using ad::DenseMatrix;
using graph::Edge;

/// No node is left to connect to the target.
class ExhaustedCandidates : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Which extreme of the symmetrized gradient wins. `Min` adds the edge whose
/// insertion most decreases the loss.
enum class PickMode { Min, Max };

struct AttackSpec {
  std::size_t target = 0;
  std::optional<int> target_label;   // required by every attack except FGA
  std::optional<std::size_t> budget; // unset: degree of the target on the clean graph
  double lambda = 20.0;
  int inner_steps = 3;
  double inner_lr = 0.01;
  std::uint64_t seed = 0;
  PickMode pick = PickMode::Min;     // FGA-T, FGA-T&E and GEAttack; FGA always ascends
  bool reinit_mask = false;          // GEAttack: fresh inner mask each outer iteration
  bool early_stop = false;           // stop once the goal is reached
};

struct StepLog {
  Edge edge;
  double grad = 0.0;    // symmetrized gradient at the chosen position
  double l_gnn = 0.0;   // classifier loss before adopting the edge
  double l_expl = 0.0;  // GEAttack: sum_j M^T[v][j] B[v][j] before adopting; 0 otherwise
};

struct AttackOutcome {
  std::string method;
  std::size_t target = 0;
  int original_label = 0;
  std::optional<int> target_label;
  int final_label = 0;
  std::vector<Edge> added;  // in adoption order
  DenseMatrix adjacency;    // perturbed
  bool success = false;     // prediction changed
  bool success_t = false;   // prediction equals target_label
  bool exhausted = false;   // ran out of candidates before spending the budget
  std::vector<StepLog> steps;
};

/// Per-node labels an attacker may use: ground truth on the train split,
/// the clean-graph prediction elsewhere.
std::vector<int> visible_labels(const gcn::GcnModel& model, const graph::Graph& g);

/// Nodes u != v with adjacency(v, u) == 0, optionally restricted to
/// labels[u] == *label_filter. Throws ExhaustedCandidates when empty.
std::vector<std::size_t> candidate_set(const DenseMatrix& adjacency, std::size_t v,
                                       std::optional<int> label_filter = std::nullopt,
                                       const std::vector<int>* labels = nullptr);

/// Extremal (q[v][j] + q[j][v]) / 2 over the candidates; ties go to the lowest j.
Edge edge_pick(const DenseMatrix& q, std::size_t v, const std::vector<std::size_t>& candidates,
               PickMode mode);

/// Same rule over a precomputed symmetrized row q_sym[j].
Edge edge_pick(const std::vector<double>& q_sym, std::size_t v, const std::vector<std::size_t>& candidates,
               PickMode mode);

/// Budget resolved against the clean graph.
std::size_t resolve_budget(const graph::Graph& g, const AttackSpec& spec);

AttackOutcome rna_attack(const gcn::GcnModel& model, const graph::Graph& g, const AttackSpec& spec);
AttackOutcome fga_attack(const gcn::GcnModel& model, const graph::Graph& g, const AttackSpec& spec);
AttackOutcome fga_t_attack(const gcn::GcnModel& model, const graph::Graph& g, const AttackSpec& spec);

/// FGA-T with every node of the clean-graph top-`top_l` explanation removed
/// from the candidates.
AttackOutcome fga_te_attack(const gcn::GcnModel& model, const graph::Graph& g, const AttackSpec& spec,
                            const explain::ExplainerConfig& explainer, std::size_t top_l);

/// Joint attack on the classifier and the mask explainer. Each outer step
/// unrolls `inner_steps` retained mask steps on the relaxed adjacency and
/// differentiates L_GNN + lambda * sum_j M^T[v][j] B[v][j] through them.
/// Every inner loop starts from initial_mask(n, seed); with reinit_mask, outer
/// step o > 0 starts from initial_mask(n, seed + o) instead.
AttackOutcome geattack(const gcn::GcnModel& model, const graph::Graph& g, const AttackSpec& spec);

/// The GEAttack objective recorded on a's tape: `inner_steps` retained mask
/// steps from mask0, then L_GNN + lambda * sum_j M^T[v][j] B[v][j] with B the
/// penalty mask (B = 11^T - I - A_clean, adopted positions zeroed).
struct GeattackTerms {
  ad::DiffValue l_gnn;
  ad::DiffValue l_expl;
  ad::DiffValue total;
  ad::DiffValue mask;  // M^T
};
GeattackTerms geattack_objective(const gcn::GcnModel& model, const ad::DiffValue& a, const ad::DiffValue& xw1,
                                 const DenseMatrix& penalty_mask, const DenseMatrix& mask0, std::size_t v,
                                 int target_label, double lambda, int inner_steps, double inner_lr);

struct GeattackGradient {
  DenseMatrix q;  // gradient of the objective w.r.t. the relaxed adjacency
  double l_gnn = 0.0;
  double l_expl = 0.0;
};
GeattackGradient geattack_gradient(const gcn::GcnModel& model, const DenseMatrix& adjacency,
                                   const DenseMatrix& xw1, const DenseMatrix& penalty_mask,
                                   const DenseMatrix& mask0, std::size_t v, int target_label,
                                   double lambda, int inner_steps, double inner_lr);

/// Symmetrized row q[j] = (Q[v][j] + Q[j][v]) / 2 of geattack_gradient with the
/// penalty row taken from `adjacency` (B[v][j] = 1 - A[v][j], j != v). Computed
/// exactly on the 4-hop neighborhood of v; memory does not grow with n^2
/// beyond the inputs. q[v] is 0.
struct RowGradient {
  std::vector<double> q;
  double l_gnn = 0.0;
  double l_expl = 0.0;
};
RowGradient geattack_row_gradient(const gcn::GcnModel& model, const DenseMatrix& adjacency, const DenseMatrix& xw1,
                                  const DenseMatrix& mask0, std::size_t v, int target_label, double lambda,
                                  int inner_steps, double inner_lr);

/// Symmetrized row of nll_gradient, computed the same way; l_gnn holds the loss.
RowGradient nll_row_gradient(const gcn::GcnModel& model, const DenseMatrix& adjacency, const DenseMatrix& xw1,
                             std::size_t v, int label);

/// Gradient of the classifier NLL of `label` at v w.r.t. the relaxed adjacency.
DenseMatrix nll_gradient(const gcn::GcnModel& model, const DenseMatrix& adjacency, const DenseMatrix& xw1,
                         std::size_t v, int label, double* loss_out = nullptr);

/// B = 11^T - I - A.
DenseMatrix penalty_mask(const DenseMatrix& adjacency);

/// {target, original_label, target_label, edges, success, success_t, per_step, ...}
std::string outcome_to_json(const AttackOutcome& outcome);

AttackOutcome run_attack(const std::string& method, const gcn::GcnModel& model, const graph::Graph& g,
                         const AttackSpec& spec, const explain::ExplainerConfig& explainer = {},
                         std::size_t top_l = 20);

std::string to_string(PickMode m);
PickMode pick_mode_from_string(const std::string& s);

}  // namespace geattack::attack
