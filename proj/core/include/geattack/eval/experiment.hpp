#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "geattack/attack/attack.hpp"
#include "geattack/eval/metrics.hpp"
#include "geattack/explain/explainer.hpp"
#include "geattack/gcn/gcn.hpp"
#include "geattack/graph/graph.hpp"

namespace geattack::eval {

struct ExperimentConfig {
  std::string dataset;  // directory read by load_graph
  std::string synth;    // synth_from_spec string, used when dataset is empty
  bool row_normalize = false;
  double train_fraction = 0.1;  // splits for datasets without splits.json
  double val_fraction = 0.1;

  std::vector<std::string> attacks{"geattack"};
  std::optional<std::size_t> budget;  // unset: target degree
  double lambda = 20.0;
  int inner_steps = 3;
  double inner_lr = 0.01;
  bool reinit_mask = false;

  std::size_t top_l = 20;
  std::size_t k = 15;
  explain::ExplainerConfig explainer;  // seed is replaced per run

  std::size_t targets = 40;
  std::size_t top_margin = 10;
  std::size_t low_margin = 10;

  gcn::TrainConfig train;  // seed is replaced per run
  int runs = 5;
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0: hardware concurrency, at most 8
  std::size_t baseline_permutations = 1000;
};

/// Throws std::invalid_argument on an unusable config; warns when K > L.
void validate(const ExperimentConfig& config);

/// Flat `key = value` lines; `#` starts a comment, strings may be quoted,
/// lists are comma separated or written as [a, b].
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& file);

enum class SelectionRule { TopMargin, LowMargin, Random };
std::string to_string(SelectionRule r);

struct TargetSelection {
  std::vector<std::size_t> nodes;
  std::vector<SelectionRule> rules;  // parallel to nodes
  std::vector<double> margins;       // parallel to nodes
  std::uint64_t seed = 0;
};

/// Eligible: test split, correctly classified on the clean graph, degree >= 1.
/// The `top` highest-margin and `low` lowest-margin eligible nodes (ties by id),
/// then count - top - low seeded picks from the rest.
TargetSelection select_targets(const gcn::GcnModel& model, const graph::Graph& g, std::size_t count,
                               std::uint64_t seed, std::size_t top = 10, std::size_t low = 10);

struct TargetLabels {
  std::map<std::size_t, int> labels;  // flipped class per target
  std::vector<std::size_t> dropped;   // FGA did not change the prediction
};

/// FGA with budget = degree per target; the flipped class becomes the target label.
TargetLabels assign_target_labels(const gcn::GcnModel& model, const graph::Graph& g,
                                  const std::vector<std::size_t>& targets);

struct TargetRow {
  int run = 0;
  std::string attack;
  std::size_t target = 0;
  SelectionRule rule = SelectionRule::Random;
  std::size_t degree = 0;
  std::size_t budget = 0;
  int original_label = 0;
  std::optional<int> target_label;
  int final_label = 0;
  std::vector<graph::Edge> added;
  bool success = false;
  bool success_t = false;
  bool exhausted = false;
  std::size_t universe = 0;  // computation-subgraph edges the inspector ranked
  std::vector<int> relevance;
  DetectionScores scores;
  double ndcg = 0.0;
  double random_ndcg = 0.0;
};

struct RunMetrics {
  double asr = 0.0;
  std::optional<double> asr_t;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double ndcg = 0.0;
  double random_ndcg = 0.0;
};

struct AttackSummary {
  std::vector<RunMetrics> runs;
  MeanStd asr;
  std::optional<MeanStd> asr_t;
  MeanStd precision;
  MeanStd recall;
  MeanStd f1;
  MeanStd ndcg;
  MeanStd random_ndcg;
};

/// Every rate is in percent.
struct MetricsReport {
  ExperimentConfig config;
  std::map<std::string, AttackSummary> attacks;
  std::vector<TargetRow> rows;
  std::vector<std::pair<int, std::size_t>> dropped;  // (run, target) where FGA failed
  std::vector<TargetSelection> selections;            // one per run
};

/// Per run r = 1..runs with seed + r: train, select, assign target labels, attack
/// every cohort target, re-fit the explainer on the perturbed graph for its
/// prediction there, and score the top-L explanation at K.
MetricsReport run_experiment(const ExperimentConfig& config);

/// run_experiment per lambda with everything else shared.
std::vector<std::pair<double, MetricsReport>> lambda_sweep(const ExperimentConfig& config,
                                                           const std::vector<double>& lambdas);

/// Graph the experiment runs on for a given run seed (largest connected component).
graph::Graph experiment_graph(const ExperimentConfig& config, std::uint64_t run_seed);

std::string config_to_json(const ExperimentConfig& config);
std::string report_to_json(const MetricsReport& report);
/// One line per attack: mean and std of each rate.
std::string report_to_csv(const MetricsReport& report);
std::string sweep_to_csv(const std::vector<std::pair<double, MetricsReport>>& sweep);

}  // namespace geattack::eval
