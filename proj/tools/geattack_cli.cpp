// geattack: train, explain, attack and evaluate from the command line.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "geattack/attack/attack.hpp"
#include "geattack/eval/experiment.hpp"
#include "geattack/eval/synth.hpp"
#include "geattack/explain/explainer.hpp"
#include "geattack/gcn/gcn.hpp"
#include "geattack/graph/io.hpp"

namespace {

using namespace geattack;

struct GraphSource {
  std::string dataset;
  std::string synth;
  std::uint64_t seed = 0;
  bool row_normalize = false;

  void add_to(CLI::App* cmd) {
    auto* d = cmd->add_option("--dataset", dataset, "Dataset directory (edges.tsv, features.csv, labels.tsv)");
    auto* s = cmd->add_option("--synth", synth, "Synthetic graph, e.g. clique_blocks:k=4,m=30");
    d->excludes(s);
    cmd->add_option("--seed", seed, "Seed for splits and synthetic graphs")->capture_default_str();
    cmd->add_flag("--row-normalize", row_normalize, "Scale feature rows to sum 1");
  }

  graph::Graph load() const {
    if (dataset.empty() && synth.empty()) throw CLI::ValidationError("one of --dataset or --synth is required");
    eval::ExperimentConfig c;
    c.dataset = dataset;
    c.synth = synth;
    c.row_normalize = row_normalize;
    return eval::experiment_graph(c, seed);
  }
};

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
}

std::vector<double> parse_lambdas(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(std::stod(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint attacks on a GCN and its mask explainer"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "Train a two-layer GCN");
  GraphSource train_src;
  train_src.add_to(train);
  gcn::TrainConfig tc;
  std::string model_out;
  std::string optimizer = "adam";
  train->add_option("--out", model_out, "Model directory")->required();
  train->add_option("--epochs", tc.epochs)->capture_default_str();
  train->add_option("--hidden", tc.hidden)->capture_default_str();
  train->add_option("--lr", tc.lr)->capture_default_str();
  train->add_option("--weight-decay", tc.weight_decay)->capture_default_str();
  train->add_option("--optimizer", optimizer, "adam or gd")->capture_default_str();

  // explain
  auto* explain_cmd = app.add_subcommand("explain", "Fit an edge mask for one node");
  GraphSource expl_src;
  expl_src.add_to(explain_cmd);
  std::string model_dir, expl_out;
  std::size_t node = 0, top_l = 20;
  std::optional<int> cls;
  explain::ExplainerConfig ec;
  explain_cmd->add_option("--model", model_dir)->required();
  explain_cmd->add_option("--node", node)->required();
  explain_cmd->add_option("--top-l", top_l)->capture_default_str();
  explain_cmd->add_option("--class", cls, "Class to explain (default: the prediction)");
  explain_cmd->add_option("--steps", ec.steps)->capture_default_str();
  explain_cmd->add_option("--explainer-lr", ec.lr)->capture_default_str();
  explain_cmd->add_option("--mask-seed", ec.seed)->capture_default_str();
  explain_cmd->add_option("--out", expl_out, "Output JSON (default stdout)");

  // attack
  auto* attack_cmd = app.add_subcommand("attack", "Perturb the edges of one target");
  GraphSource atk_src;
  atk_src.add_to(attack_cmd);
  std::string atk_model, method = "geattack", budget = "degree", pick = "min", atk_out;
  attack::AttackSpec spec;
  std::size_t atk_top_l = 20;
  explain::ExplainerConfig atk_ec;
  attack_cmd->add_option("--model", atk_model)->required();
  attack_cmd->add_option("--method", method)
      ->check(CLI::IsMember({"rna", "fga", "fga-t", "fga-te", "geattack"}))
      ->capture_default_str();
  attack_cmd->add_option("--node", spec.target)->required();
  attack_cmd->add_option("--target-label", spec.target_label);
  attack_cmd->add_option("--budget", budget, "degree or a count")->capture_default_str();
  attack_cmd->add_option("--lambda", spec.lambda)->capture_default_str();
  attack_cmd->add_option("--inner-steps", spec.inner_steps)->capture_default_str();
  attack_cmd->add_option("--inner-lr", spec.inner_lr)->capture_default_str();
  attack_cmd->add_option("--attack-seed", spec.seed)->capture_default_str();
  attack_cmd->add_option("--pick", pick)->check(CLI::IsMember({"min", "max"}))->capture_default_str();
  attack_cmd->add_flag("--reinit-mask", spec.reinit_mask);
  attack_cmd->add_flag("--early-stop", spec.early_stop);
  attack_cmd->add_option("--top-l", atk_top_l, "fga-te: explanation size to avoid")->capture_default_str();
  attack_cmd->add_option("--explainer-steps", atk_ec.steps, "fga-te: explainer steps")->capture_default_str();
  attack_cmd->add_option("--out", atk_out, "Output JSON (default stdout)");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Run the full protocol from a config file");
  std::string config_path, report_out, csv_out;
  eval_cmd->add_option("--config", config_path)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", report_out, "Report JSON")->required();
  eval_cmd->add_option("--csv", csv_out, "Summary CSV");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Repeat the protocol over several lambda values");
  std::string sweep_config, lambdas = "0.01,1,20,50,100", sweep_out;
  sweep_cmd->add_option("--config", sweep_config)->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--lambda", lambdas, "Comma separated")->capture_default_str();
  sweep_cmd->add_option("--out", sweep_out, "Joined CSV")->required();

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic graph in dataset layout");
  std::string synth_spec, synth_out;
  std::uint64_t synth_seed = 0;
  synth_cmd->add_option("spec", synth_spec, "clique_blocks:... or planted_motif:...")->required();
  synth_cmd->add_option("--seed", synth_seed)->capture_default_str();
  synth_cmd->add_option("--out", synth_out, "Dataset directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    spdlog::set_level(spdlog::level::from_str(log_level));
    if (*train) {
      tc.seed = train_src.seed;
      tc.optimizer = gcn::optimizer_from_string(optimizer);
      const auto g = train_src.load();
      const auto model = gcn::train_gcn(g, tc);
      gcn::save_model(model, model_out);
      spdlog::info("trained: best epoch {}, train acc {:.4f}, val acc {:.4f}", model.record.best_epoch,
                   model.record.train_accuracy, model.record.val_accuracy);
    } else if (*explain_cmd) {
      const auto g = expl_src.load();
      const auto model = gcn::load_model(model_dir);
      const int c = cls.value_or(gcn::predict(model, g, node).label);
      const auto mask = explain::fit_mask(model, g, node, c, ec);
      write_text(expl_out, explain::explanation_to_json(explain::extract_explanation(mask, g.adjacency, top_l)));
    } else if (*attack_cmd) {
      const auto g = atk_src.load();
      const auto model = gcn::load_model(atk_model);
      if (budget != "degree") spec.budget = std::stoul(budget);
      spec.pick = attack::pick_mode_from_string(pick);
      const auto o = attack::run_attack(method, model, g, spec, atk_ec, atk_top_l);
      write_text(atk_out, attack::outcome_to_json(o));
      spdlog::info("{} on node {}: {} edges, label {} -> {}", method, spec.target, o.added.size(),
                   o.original_label, o.final_label);
    } else if (*eval_cmd) {
      const auto report = eval::run_experiment(eval::load_config(config_path));
      write_text(report_out, eval::report_to_json(report));
      if (!csv_out.empty()) write_text(csv_out, eval::report_to_csv(report));
      std::cout << eval::report_to_csv(report);
    } else if (*sweep_cmd) {
      const auto sweep = eval::lambda_sweep(eval::load_config(sweep_config), parse_lambdas(lambdas));
      write_text(sweep_out, eval::sweep_to_csv(sweep));
    } else if (*synth_cmd) {
      graph::save_graph(eval::synth_from_spec(synth_spec, synth_seed).graph, synth_out);
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
