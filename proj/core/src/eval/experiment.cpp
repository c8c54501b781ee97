#include "geattack/eval/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "geattack/eval/synth.hpp"
#include "geattack/graph/io.hpp"

namespace geattack::eval {

namespace {

using nlohmann::json;

// Inspector and attacker draw their masks from different streams.
std::uint64_t attack_seed(std::uint64_t run_seed, std::size_t v) {
  return run_seed ^ (0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(v) + 1));
}

std::size_t worker_count(const ExperimentConfig& c, std::size_t jobs) {
  std::size_t t = c.threads;
  if (t == 0) t = std::min<std::size_t>(8, std::max(1u, std::thread::hardware_concurrency()));
  return std::max<std::size_t>(1, std::min(t, jobs));
}

/// Runs body(i) for i in [0, jobs); rethrows the failure with the lowest index.
void parallel_for(std::size_t jobs, std::size_t workers, const std::function<void(std::size_t)>& body) {
  std::vector<std::exception_ptr> errors(jobs);
  std::atomic<std::size_t> next{0};
  auto loop = [&] {
    for (std::size_t i = next++; i < jobs; i = next++) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    loop();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(loop);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front())
    return s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split_list(std::string s) {
  s = trim(s);
  if (s.size() >= 2 && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    item = unquote(trim(item));
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw std::invalid_argument("config key '" + key + "': expected true or false, got '" + v + "'");
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  std::istringstream in(v);
  T out{};
  in >> out;
  if (!in || !in.eof()) throw std::invalid_argument("config key '" + key + "': bad number '" + v + "'");
  if constexpr (std::is_unsigned_v<T>) {
    if (v.find('-') != std::string::npos)
      throw std::invalid_argument("config key '" + key + "': must not be negative");
  }
  return out;
}

json row_json(const TargetRow& r) {
  json j;
  j["run"] = r.run;
  j["attack"] = r.attack;
  j["target"] = r.target;
  j["selection"] = to_string(r.rule);
  j["degree"] = r.degree;
  j["budget"] = r.budget;
  j["original_label"] = r.original_label;
  j["target_label"] = r.target_label ? json(*r.target_label) : json(nullptr);
  j["final_label"] = r.final_label;
  j["edges"] = json::array();
  for (const auto& e : r.added) j["edges"].push_back({e.u, e.v});
  j["success"] = r.success;
  j["success_t"] = r.success_t;
  j["exhausted"] = r.exhausted;
  j["universe"] = r.universe;
  j["relevance"] = r.relevance;
  j["precision"] = r.scores.precision;
  j["recall"] = r.scores.recall;
  j["f1"] = r.scores.f1;
  j["ndcg"] = r.ndcg;
  j["random_ndcg"] = r.random_ndcg;
  return j;
}

json mean_std_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

RunMetrics summarize_run(const std::vector<TargetRow>& rows, const std::vector<attack::AttackOutcome>& outcomes) {
  RunMetrics m;
  m.asr = asr(outcomes);
  m.asr_t = asr_t(outcomes);
  const double n = static_cast<double>(rows.size());
  for (const auto& r : rows) {
    m.precision += 100.0 * r.scores.precision / n;
    m.recall += 100.0 * r.scores.recall / n;
    m.f1 += 100.0 * r.scores.f1 / n;
    m.ndcg += 100.0 * r.ndcg / n;
    m.random_ndcg += 100.0 * r.random_ndcg / n;
  }
  return m;
}

AttackSummary aggregate(std::vector<RunMetrics> runs) {
  AttackSummary s;
  auto column = [&](auto field) {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(field(r));
    return mean_std(v);
  };
  s.asr = column([](const RunMetrics& r) { return r.asr; });
  if (std::all_of(runs.begin(), runs.end(), [](const RunMetrics& r) { return r.asr_t.has_value(); }))
    s.asr_t = column([](const RunMetrics& r) { return *r.asr_t; });
  s.precision = column([](const RunMetrics& r) { return r.precision; });
  s.recall = column([](const RunMetrics& r) { return r.recall; });
  s.f1 = column([](const RunMetrics& r) { return r.f1; });
  s.ndcg = column([](const RunMetrics& r) { return r.ndcg; });
  s.random_ndcg = column([](const RunMetrics& r) { return r.random_ndcg; });
  s.runs = std::move(runs);
  return s;
}

}  // namespace

void validate(const ExperimentConfig& c) {
  if (c.dataset.empty() && c.synth.empty()) throw std::invalid_argument("config: set dataset or synth");
  if (c.runs < 1) throw std::invalid_argument("config: runs must be at least 1");
  if (c.k < 1) throw std::invalid_argument("config: K must be at least 1");
  if (c.top_l < 1) throw std::invalid_argument("config: L must be at least 1");
  if (c.targets < 1) throw std::invalid_argument("config: need at least one target");
  if (c.attacks.empty()) throw std::invalid_argument("config: no attack configured");
  const std::set<std::string> known{"rna", "fga", "fga-t", "fga-te", "geattack"};
  for (const auto& a : c.attacks)
    if (!known.count(a)) throw std::invalid_argument("config: unknown attack '" + a + "'");
  if (!std::isfinite(c.lambda) || c.lambda < 0.0) throw std::invalid_argument("config: lambda must be >= 0");
  if (c.inner_steps < 0) throw std::invalid_argument("config: inner_steps must be >= 0");
  if (c.explainer.steps < 0) throw std::invalid_argument("config: explainer_steps must be >= 0");
  if (c.baseline_permutations < 1) throw std::invalid_argument("config: baseline_permutations must be >= 1");
  if (c.k > c.top_l) spdlog::warn("config: K = {} exceeds L = {}; relevance is padded with zeros", c.k, c.top_l);
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  std::istringstream in(text);
  int lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string raw = trim(line.substr(eq + 1));
    const std::string v = unquote(raw);
    if (key == "dataset") c.dataset = v;
    else if (key == "synth") c.synth = v;
    else if (key == "row_normalize") c.row_normalize = parse_bool(key, v);
    else if (key == "train_fraction") c.train_fraction = parse_number<double>(key, v);
    else if (key == "val_fraction") c.val_fraction = parse_number<double>(key, v);
    else if (key == "attack" || key == "attacks") c.attacks = split_list(raw);
    else if (key == "budget") c.budget = v == "degree" ? std::nullopt : std::optional(parse_number<std::size_t>(key, v));
    else if (key == "lambda") c.lambda = parse_number<double>(key, v);
    else if (key == "inner_steps") c.inner_steps = parse_number<int>(key, v);
    else if (key == "inner_lr") c.inner_lr = parse_number<double>(key, v);
    else if (key == "reinit_mask") c.reinit_mask = parse_bool(key, v);
    else if (key == "top_l" || key == "L") c.top_l = parse_number<std::size_t>(key, v);
    else if (key == "k" || key == "K") c.k = parse_number<std::size_t>(key, v);
    else if (key == "explainer_lr") c.explainer.lr = parse_number<double>(key, v);
    else if (key == "explainer_steps") c.explainer.steps = parse_number<int>(key, v);
    else if (key == "explainer_regularize") c.explainer.regularize = parse_bool(key, v);
    else if (key == "targets") c.targets = parse_number<std::size_t>(key, v);
    else if (key == "top_margin") c.top_margin = parse_number<std::size_t>(key, v);
    else if (key == "low_margin") c.low_margin = parse_number<std::size_t>(key, v);
    else if (key == "hidden") c.train.hidden = parse_number<std::size_t>(key, v);
    else if (key == "epochs") c.train.epochs = parse_number<int>(key, v);
    else if (key == "train_lr") c.train.lr = parse_number<double>(key, v);
    else if (key == "weight_decay") c.train.weight_decay = parse_number<double>(key, v);
    else if (key == "optimizer") c.train.optimizer = gcn::optimizer_from_string(v);
    else if (key == "runs") c.runs = parse_number<int>(key, v);
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v);
    else if (key == "threads") c.threads = parse_number<std::size_t>(key, v);
    else if (key == "baseline_permutations") c.baseline_permutations = parse_number<std::size_t>(key, v);
    else throw std::invalid_argument("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open config " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_string(SelectionRule r) {
  switch (r) {
    case SelectionRule::TopMargin: return "top";
    case SelectionRule::LowMargin: return "low";
    case SelectionRule::Random: return "random";
  }
  return "random";
}

TargetSelection select_targets(const gcn::GcnModel& model, const graph::Graph& g, std::size_t count,
                               std::uint64_t seed, std::size_t top, std::size_t low) {
  const ad::DenseMatrix probs = gcn::forward_values(model, g.adjacency, *g.features);
  std::vector<std::pair<double, std::size_t>> eligible;  // (margin, node)
  for (std::size_t v : g.nodes_in(graph::Split::Test)) {
    const auto p = gcn::prediction_from(probs, v, v);
    if (p.label != g.labels[v] || graph::node_degree(g.adjacency, v) == 0) continue;
    eligible.emplace_back(p.margin(), v);
  }
  if (eligible.size() < count)
    throw std::invalid_argument("select_targets: need " + std::to_string(count) + " eligible nodes, found " +
                                std::to_string(eligible.size()) + " (short by " +
                                std::to_string(count - eligible.size()) + ")");
  // descending margin, ties by id
  std::sort(eligible.begin(), eligible.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  TargetSelection out;
  out.seed = seed;
  auto take = [&](std::size_t idx, SelectionRule rule) {
    out.nodes.push_back(eligible[idx].second);
    out.margins.push_back(eligible[idx].first);
    out.rules.push_back(rule);
  };
  const std::size_t n_top = std::min(top, count);
  const std::size_t n_low = std::min(low, count - n_top);
  for (std::size_t i = 0; i < n_top; ++i) take(i, SelectionRule::TopMargin);
  for (std::size_t i = 0; i < n_low; ++i) take(eligible.size() - 1 - i, SelectionRule::LowMargin);
  std::vector<std::size_t> rest;
  for (std::size_t i = n_top; i + n_low < eligible.size(); ++i) rest.push_back(i);
  std::mt19937_64 rng(seed);
  std::shuffle(rest.begin(), rest.end(), rng);
  for (std::size_t i = 0; i < count - n_top - n_low; ++i) take(rest[i], SelectionRule::Random);
  return out;
}

TargetLabels assign_target_labels(const gcn::GcnModel& model, const graph::Graph& g,
                                  const std::vector<std::size_t>& targets) {
  TargetLabels out;
  for (std::size_t v : targets) {
    attack::AttackSpec spec;
    spec.target = v;
    const auto o = attack::fga_attack(model, g, spec);
    if (o.success) out.labels[v] = o.final_label;
    else out.dropped.push_back(v);
  }
  return out;
}

graph::Graph experiment_graph(const ExperimentConfig& c, std::uint64_t run_seed) {
  graph::Graph g;
  if (!c.dataset.empty()) {
    g = graph::load_graph(c.dataset, {.row_normalize = c.row_normalize});
  } else {
    g = synth_from_spec(c.synth, run_seed).graph;
  }
  g = graph::largest_connected_component(g).graph;
  if (!g.has_splits()) g = graph::make_splits(g, {c.train_fraction, c.val_fraction, run_seed});
  return g;
}

MetricsReport run_experiment(const ExperimentConfig& config) {
  validate(config);
  MetricsReport report;
  report.config = config;
  std::map<std::string, std::vector<RunMetrics>> per_attack;

  for (int r = 1; r <= config.runs; ++r) {
    const std::uint64_t run_seed = config.seed + static_cast<std::uint64_t>(r);
    try {
      const graph::Graph g = experiment_graph(config, run_seed);
      gcn::TrainConfig tc = config.train;
      tc.seed = run_seed;
      const gcn::GcnModel model = gcn::train_gcn(g, tc);
      TargetSelection sel = select_targets(model, g, config.targets, run_seed, config.top_margin, config.low_margin);
      const TargetLabels labels = assign_target_labels(model, g, sel.nodes);
      for (std::size_t v : labels.dropped) report.dropped.emplace_back(r, v);
      std::vector<std::size_t> cohort;
      std::vector<SelectionRule> rules;
      for (std::size_t i = 0; i < sel.nodes.size(); ++i)
        if (labels.labels.count(sel.nodes[i])) {
          cohort.push_back(sel.nodes[i]);
          rules.push_back(sel.rules[i]);
        }
      spdlog::info("run {}: {} targets, {} kept after FGA", r, sel.nodes.size(), cohort.size());
      report.selections.push_back(std::move(sel));
      if (cohort.empty()) throw EmptyCohort("FGA changed no target prediction");

      explain::ExplainerConfig inspector = config.explainer;
      inspector.seed = run_seed;
      for (const std::string& method : config.attacks) {
        std::vector<attack::AttackOutcome> outcomes(cohort.size());
        std::vector<TargetRow> rows(cohort.size());
        parallel_for(cohort.size(), worker_count(config, cohort.size()), [&](std::size_t i) {
          const std::size_t v = cohort[i];
          try {
            attack::AttackSpec spec;
            spec.target = v;
            spec.target_label = labels.labels.at(v);
            spec.budget = config.budget;
            spec.lambda = config.lambda;
            spec.inner_steps = config.inner_steps;
            spec.inner_lr = config.inner_lr;
            spec.reinit_mask = config.reinit_mask;
            spec.seed = attack_seed(run_seed, v);
            attack::AttackOutcome o = attack::run_attack(method, model, g, spec, inspector, config.top_l);

            const graph::Graph perturbed = graph::with_adjacency(g, o.adjacency);
            const auto mask = explain::fit_mask(model, perturbed, v, o.final_label, inspector);
            const auto expl = explain::extract_explanation(mask, o.adjacency, config.top_l);

            TargetRow& row = rows[i];
            row.run = r;
            row.attack = method;
            row.target = v;
            row.rule = rules[i];
            row.degree = graph::node_degree(g.adjacency, v);
            row.budget = attack::resolve_budget(g, spec);
            row.original_label = o.original_label;
            row.target_label = o.target_label;
            row.final_label = o.final_label;
            row.added = o.added;
            row.success = o.success;
            row.success_t = o.success_t;
            row.exhausted = o.exhausted;
            row.universe = expl.universe.size();
            row.relevance = explain::detection_rank(expl, o.added);
            row.scores = precision_recall_f1_at_k(row.relevance, o.added.size(), config.k);
            row.ndcg = ndcg_at_k(row.relevance, o.added.size(), config.k);
            row.random_ndcg = random_ndcg_baseline(row.universe, o.added.size(), config.k,
                                                   config.baseline_permutations, attack_seed(run_seed, v) + 1);
            outcomes[i] = std::move(o);
          } catch (const std::exception& e) {
            throw std::runtime_error(method + " on target " + std::to_string(v) + ": " + e.what());
          }
        });
        per_attack[method].push_back(summarize_run(rows, outcomes));
        report.rows.insert(report.rows.end(), rows.begin(), rows.end());
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("run " + std::to_string(r) + " (seed " + std::to_string(run_seed) + "): " + e.what());
    }
  }
  for (auto& [method, runs] : per_attack) report.attacks[method] = aggregate(std::move(runs));
  return report;
}

std::vector<std::pair<double, MetricsReport>> lambda_sweep(const ExperimentConfig& config,
                                                           const std::vector<double>& lambdas) {
  if (lambdas.size() < 2) throw std::invalid_argument("lambda_sweep: need at least two lambda values");
  std::vector<std::pair<double, MetricsReport>> out;
  for (double l : lambdas) {
    ExperimentConfig c = config;
    c.lambda = l;
    spdlog::info("lambda sweep: lambda = {}", l);
    out.emplace_back(l, run_experiment(c));
  }
  return out;
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["dataset"] = c.dataset;
  j["synth"] = c.synth;
  j["row_normalize"] = c.row_normalize;
  j["train_fraction"] = c.train_fraction;
  j["val_fraction"] = c.val_fraction;
  j["attacks"] = c.attacks;
  j["budget"] = c.budget ? json(*c.budget) : json("degree");
  j["lambda"] = c.lambda;
  j["inner_steps"] = c.inner_steps;
  j["inner_lr"] = c.inner_lr;
  j["reinit_mask"] = c.reinit_mask;
  j["top_l"] = c.top_l;
  j["k"] = c.k;
  j["explainer_lr"] = c.explainer.lr;
  j["explainer_steps"] = c.explainer.steps;
  j["explainer_regularize"] = c.explainer.regularize;
  j["targets"] = c.targets;
  j["top_margin"] = c.top_margin;
  j["low_margin"] = c.low_margin;
  j["hidden"] = c.train.hidden;
  j["epochs"] = c.train.epochs;
  j["train_lr"] = c.train.lr;
  j["weight_decay"] = c.train.weight_decay;
  j["optimizer"] = gcn::to_string(c.train.optimizer);
  j["runs"] = c.runs;
  j["seed"] = c.seed;
  j["baseline_permutations"] = c.baseline_permutations;
  return j.dump(2);
}

std::string report_to_json(const MetricsReport& report) {
  json j;
  j["config"] = json::parse(config_to_json(report.config));
  j["metadata"] = {
      {"units", "percent"},
      {"std", "population std over runs"},
      {"ranking", "relevance is read within the top-L explanation and padded with zeros to K"},
      {"explainer", "re-fit on the perturbed graph for the perturbed prediction, one config for every attack"},
  };
  j["attacks"] = json::object();
  for (const auto& [method, s] : report.attacks) {
    json a;
    a["asr"] = mean_std_json(s.asr);
    a["asr_t"] = s.asr_t ? mean_std_json(*s.asr_t) : json(nullptr);
    a["precision"] = mean_std_json(s.precision);
    a["recall"] = mean_std_json(s.recall);
    a["f1"] = mean_std_json(s.f1);
    a["ndcg"] = mean_std_json(s.ndcg);
    a["random_ndcg"] = mean_std_json(s.random_ndcg);
    a["runs"] = json::array();
    for (const auto& r : s.runs)
      a["runs"].push_back({{"asr", r.asr},
                           {"asr_t", r.asr_t ? json(*r.asr_t) : json(nullptr)},
                           {"precision", r.precision},
                           {"recall", r.recall},
                           {"f1", r.f1},
                           {"ndcg", r.ndcg},
                           {"random_ndcg", r.random_ndcg}});
    j["attacks"][method] = std::move(a);
  }
  j["dropped"] = json::array();
  for (const auto& [run, v] : report.dropped) j["dropped"].push_back({{"run", run}, {"target", v}});
  j["selections"] = json::array();
  for (const auto& sel : report.selections) {
    json s = json::array();
    for (std::size_t i = 0; i < sel.nodes.size(); ++i)
      s.push_back({{"node", sel.nodes[i]}, {"rule", to_string(sel.rules[i])}, {"margin", sel.margins[i]}});
    j["selections"].push_back({{"seed", sel.seed}, {"targets", std::move(s)}});
  }
  j["rows"] = json::array();
  for (const auto& r : report.rows) j["rows"].push_back(row_json(r));
  return j.dump(2);
}

namespace {

void csv_columns(std::ostream& out, const AttackSummary& s) {
  auto pair = [&](const MeanStd& m) { out << ',' << m.mean << ',' << m.std; };
  pair(s.asr);
  if (s.asr_t) pair(*s.asr_t);
  else out << ",,";
  pair(s.precision);
  pair(s.recall);
  pair(s.f1);
  pair(s.ndcg);
  pair(s.random_ndcg);
}

constexpr const char* kCsvMetrics =
    "asr_mean,asr_std,asr_t_mean,asr_t_std,precision_mean,precision_std,recall_mean,recall_std,"
    "f1_mean,f1_std,ndcg_mean,ndcg_std,random_ndcg_mean,random_ndcg_std";

}  // namespace

std::string report_to_csv(const MetricsReport& report) {
  std::ostringstream out;
  out.precision(10);
  out << "attack," << kCsvMetrics << '\n';
  for (const auto& [method, s] : report.attacks) {
    out << method;
    csv_columns(out, s);
    out << '\n';
  }
  return out.str();
}

std::string sweep_to_csv(const std::vector<std::pair<double, MetricsReport>>& sweep) {
  std::ostringstream out;
  out.precision(10);
  out << "lambda,attack," << kCsvMetrics << '\n';
  for (const auto& [lambda, report] : sweep)
    for (const auto& [method, s] : report.attacks) {
      out << lambda << ',' << method;
      csv_columns(out, s);
      out << '\n';
    }
  return out.str();
}

}  // namespace geattack::eval
