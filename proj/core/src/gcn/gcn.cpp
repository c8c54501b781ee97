#include "geattack/gcn/gcn.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>
#include <stdexcept>

#include "geattack/autodiff/kernels.hpp"
#include "geattack/autodiff/ops.hpp"
#include "geattack/graph/io.hpp"

namespace geattack::gcn {

namespace k = ad::kernels;

double Prediction::margin() const {
  double best = -1.0, second = -1.0;
  for (double p : probs) {
    if (p > best) {
      second = best;
      best = p;
    } else if (p > second) {
      second = p;
    }
  }
  return probs.size() < 2 ? best : best - second;
}

DiffValue normalize_adjacency(const DiffValue& a) {
  DiffValue inv_sqrt_deg = ad::pow(ad::add_scalar(ad::row_sum(a), 1.0), -0.5);
  return ad::diag_scale(ad::add_identity(a), inv_sqrt_deg);
}

DenseMatrix normalize_adjacency(const DenseMatrix& a) {
  DenseMatrix s = k::pow(k::add_scalar(k::row_sum(a), 1.0), -0.5);
  return k::diag_scale(k::add_identity(a), s);
}

DiffValue gcn_forward(const DiffValue& w1, const DiffValue& w2, const DiffValue& a,
                      const DiffValue& x) {
  DiffValue an = normalize_adjacency(a);
  DiffValue h = ad::relu(ad::matmul(an, ad::matmul(x, w1)));
  return ad::softmax_rows(ad::matmul(an, ad::matmul(h, w2)));
}

DiffValue gcn_forward(const GcnModel& model, const DiffValue& a, const DiffValue& x) {
  ad::Tape& t = a.tape();
  return gcn_forward(t.constant(model.w1), t.constant(model.w2), a, x);
}

DiffValue node_probs(const GcnModel& model, const DiffValue& a, const DiffValue& xw1, std::size_t v) {
  DiffValue an = normalize_adjacency(a);
  DiffValue h = ad::relu(ad::matmul(an, xw1));
  DiffValue hw2 = ad::matmul(h, a.tape().constant(model.w2));
  return ad::softmax_rows(ad::matmul(ad::select_row(an, v), hw2));
}

DiffValue nll_loss(const DiffValue& probs, std::size_t node, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= probs.cols())
    throw std::invalid_argument("nll_loss: label " + std::to_string(label) + " outside [0, " +
                                std::to_string(probs.cols()) + ")");
  return ad::neg(ad::ln(ad::clamp_min(ad::pick(probs, node, static_cast<std::size_t>(label)), 1e-12)));
}

DenseMatrix input_projection(const GcnModel& model, const DenseMatrix& features) {
  return k::matmul(features, model.w1);
}

DenseMatrix forward_values(const GcnModel& model, const DenseMatrix& adjacency,
                           const DenseMatrix& features) {
  DenseMatrix an = normalize_adjacency(adjacency);
  DenseMatrix h = k::relu(k::matmul(an, input_projection(model, features)));
  return k::softmax_rows(k::matmul(an, k::matmul(h, model.w2)));
}

DenseMatrix node_probs_values(const GcnModel& model, const DenseMatrix& adjacency,
                              const DenseMatrix& xw1, std::size_t v) {
  DenseMatrix an = normalize_adjacency(adjacency);
  DenseMatrix h = k::relu(k::matmul(an, xw1));
  return k::softmax_rows(k::matmul(k::select_row(an, v), k::matmul(h, model.w2)));
}

GcnModel init_model(std::size_t input_dim, std::size_t num_classes, const TrainConfig& config) {
  if (input_dim == 0 || num_classes == 0 || config.hidden == 0)
    throw std::invalid_argument("init_model: dimensions must be positive");
  std::mt19937_64 rng(config.seed);
  auto draw = [&](std::size_t rows, std::size_t cols) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
    std::uniform_real_distribution<double> u(-bound, bound);
    DenseMatrix w(rows, cols);
    for (double& x : w.values()) x = u(rng);
    return w;
  };
  GcnModel m;
  m.w1 = draw(input_dim, config.hidden);
  m.w2 = draw(config.hidden, num_classes);
  m.config = config;
  return m;
}

int argmax_row(const DenseMatrix& probs, std::size_t row) {
  auto r = probs.row(row);
  std::size_t best = 0;
  for (std::size_t c = 1; c < r.size(); ++c)
    if (r[c] > r[best]) best = c;
  return static_cast<int>(best);
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& labels,
                const std::vector<std::size_t>& nodes) {
  if (nodes.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t v : nodes) hits += predicted[v] == labels[v];
  return static_cast<double>(hits) / static_cast<double>(nodes.size());
}

namespace {

std::vector<int> labels_of(const DenseMatrix& probs) {
  std::vector<int> out(probs.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i) out[i] = argmax_row(probs, i);
  return out;
}

struct AdamState {
  DenseMatrix m, v;
  int t = 0;
};

void adam_update(DenseMatrix& w, const DenseMatrix& g, AdamState& s, double lr) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  if (s.m.empty()) {
    s.m = DenseMatrix(w.rows(), w.cols());
    s.v = DenseMatrix(w.rows(), w.cols());
  }
  ++s.t;
  const double c1 = 1.0 - std::pow(b1, s.t), c2 = 1.0 - std::pow(b2, s.t);
  auto wv = w.values();
  auto gv = g.values();
  auto mv = s.m.values();
  auto vv = s.v.values();
  for (std::size_t i = 0; i < wv.size(); ++i) {
    mv[i] = b1 * mv[i] + (1 - b1) * gv[i];
    vv[i] = b2 * vv[i] + (1 - b2) * gv[i] * gv[i];
    wv[i] -= lr * (mv[i] / c1) / (std::sqrt(vv[i] / c2) + eps);
  }
}

}  // namespace

GcnModel train_gcn(const graph::Graph& g, const TrainConfig& config) {
  graph::validate(g);
  const auto train = g.nodes_in(graph::Split::Train);
  const auto val = g.nodes_in(graph::Split::Val);
  if (train.empty()) throw std::invalid_argument("train_gcn: no train nodes");
  if (config.epochs < 0) throw std::invalid_argument("train_gcn: negative epoch count");

  GcnModel model = init_model(g.features->cols(), static_cast<std::size_t>(g.num_classes), config);
  auto an = std::make_shared<const DenseMatrix>(normalize_adjacency(g.adjacency));

  // mask[i][c] = 1/|train| at each train node's true class
  DenseMatrix target(g.n(), model.num_classes());
  for (std::size_t v : train) target(v, static_cast<std::size_t>(g.labels[v])) = 1.0 / train.size();

  std::mt19937_64 dropout_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::bernoulli_distribution keep(1.0 - config.dropout_rate);

  auto loss_and_grads = [&](bool with_dropout, DenseMatrix* g1, DenseMatrix* g2) {
    ad::Tape t;
    DiffValue w1 = t.variable(model.w1), w2 = t.variable(model.w2);
    DiffValue a = t.constant(an);
    DiffValue h = ad::relu(ad::matmul(a, ad::matmul(t.constant(g.features), w1)));
    if (with_dropout) {
      DenseMatrix mask(h.rows(), h.cols());
      for (double& x : mask.values()) x = keep(dropout_rng) ? 1.0 / (1.0 - config.dropout_rate) : 0.0;
      h = ad::mul(h, t.constant(std::move(mask)));
    }
    DiffValue probs = ad::softmax_rows(ad::matmul(a, ad::matmul(h, w2)));
    DiffValue nll = ad::neg(ad::sum(ad::mul(ad::ln(ad::clamp_min(probs, 1e-12)), t.constant(target))));
    DiffValue reg = ad::scale(ad::add(ad::sum(ad::mul(w1, w1)), ad::sum(ad::mul(w2, w2))),
                              0.5 * config.weight_decay);
    DiffValue loss = ad::add(nll, reg);
    if (g1) {
      const DiffValue wrt[] = {w1, w2};
      auto grads = t.gradient_values(loss, wrt);
      *g1 = std::move(grads[0]);
      *g2 = std::move(grads[1]);
    }
    return loss.value().item();
  };

  const bool use_dropout = config.dropout && config.dropout_rate > 0.0;
  GcnModel best = model;
  double best_val = -1.0;
  AdamState s1, s2;
  for (int epoch = 0; epoch <= config.epochs; ++epoch) {
    // validation accuracy of the current weights
    const auto predicted = predict_labels(model, g.adjacency, *g.features);
    const double val_acc = accuracy(predicted, g.labels, val.empty() ? train : val);
    if (val_acc >= best_val) {
      best_val = val_acc;
      best = model;
      best.record.best_epoch = epoch;
    }
    if (epoch == config.epochs) {
      model.record.loss_history.push_back(loss_and_grads(false, nullptr, nullptr));
      break;
    }
    DenseMatrix g1, g2;
    const double loss = loss_and_grads(use_dropout, &g1, &g2);
    model.record.loss_history.push_back(use_dropout ? loss_and_grads(false, nullptr, nullptr) : loss);
    if (!g1.all_finite() || !g2.all_finite())
      throw std::runtime_error("train_gcn: non-finite gradient at epoch " + std::to_string(epoch));
    if (config.optimizer == Optimizer::Adam) {
      adam_update(model.w1, g1, s1, config.lr);
      adam_update(model.w2, g2, s2, config.lr);
    } else {
      model.w1 = k::sub(model.w1, k::scale(g1, config.lr));
      model.w2 = k::sub(model.w2, k::scale(g2, config.lr));
    }
  }

  best.config = config;
  best.record.loss_history = std::move(model.record.loss_history);
  const auto predicted = predict_labels(best, g.adjacency, *g.features);
  best.record.train_accuracy = accuracy(predicted, g.labels, train);
  best.record.val_accuracy = accuracy(predicted, g.labels, val);
  spdlog::debug("train_gcn: best epoch {}, train acc {:.3f}, val acc {:.3f}", best.record.best_epoch,
                best.record.train_accuracy, best.record.val_accuracy);
  return best;
}

Prediction prediction_from(const DenseMatrix& probs, std::size_t row, std::size_t node) {
  Prediction p;
  p.node = node;
  auto r = probs.row(row);
  p.probs.assign(r.begin(), r.end());
  p.label = argmax_row(probs, row);
  return p;
}

Prediction predict(const GcnModel& model, const graph::Graph& g, std::size_t v) {
  if (v >= g.n()) throw std::out_of_range("predict: node " + std::to_string(v) + " out of range");
  DenseMatrix probs = node_probs_values(model, g.adjacency, input_projection(model, *g.features), v);
  return prediction_from(probs, 0, v);
}

std::vector<int> predict_labels(const GcnModel& model, const DenseMatrix& adjacency,
                                const DenseMatrix& features) {
  return labels_of(forward_values(model, adjacency, features));
}

std::string to_string(Optimizer o) { return o == Optimizer::Adam ? "adam" : "gd"; }

Optimizer optimizer_from_string(const std::string& s) {
  if (s == "gd") return Optimizer::GradientDescent;
  if (s == "adam") return Optimizer::Adam;
  throw std::invalid_argument("unknown optimizer '" + s + "' (expected gd or adam)");
}

void save_model(const GcnModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& c = model.config;
  nlohmann::json meta = {
      {"input_dim", model.input_dim()},
      {"hidden", model.hidden_dim()},
      {"num_classes", model.num_classes()},
      {"lr", c.lr},
      {"epochs", c.epochs},
      {"weight_decay", c.weight_decay},
      {"seed", c.seed},
      {"optimizer", to_string(c.optimizer)},
      {"dropout", c.dropout},
      {"dropout_rate", c.dropout_rate},
      {"best_epoch", model.record.best_epoch},
      {"train_accuracy", model.record.train_accuracy},
      {"val_accuracy", model.record.val_accuracy},
  };
  std::ofstream(dir / "meta.json") << meta.dump(2) << '\n';
  graph::write_matrix_csv(model.w1, dir / "w1.csv");
  graph::write_matrix_csv(model.w2, dir / "w2.csv");
}

GcnModel load_model(const std::filesystem::path& dir) {
  std::ifstream in(dir / "meta.json");
  if (!in) throw std::runtime_error("cannot open " + (dir / "meta.json").string());
  nlohmann::json meta = nlohmann::json::parse(in);
  GcnModel m;
  m.w1 = graph::read_matrix_csv(dir / "w1.csv");
  m.w2 = graph::read_matrix_csv(dir / "w2.csv");
  auto& c = m.config;
  c.hidden = meta.at("hidden").get<std::size_t>();
  c.lr = meta.at("lr").get<double>();
  c.epochs = meta.at("epochs").get<int>();
  c.weight_decay = meta.at("weight_decay").get<double>();
  c.seed = meta.at("seed").get<std::uint64_t>();
  c.optimizer = optimizer_from_string(meta.at("optimizer").get<std::string>());
  c.dropout = meta.value("dropout", false);
  c.dropout_rate = meta.value("dropout_rate", 0.5);
  m.record.best_epoch = meta.value("best_epoch", 0);
  m.record.train_accuracy = meta.value("train_accuracy", 0.0);
  m.record.val_accuracy = meta.value("val_accuracy", 0.0);
  if (m.w1.rows() != meta.at("input_dim").get<std::size_t>() || m.w1.cols() != c.hidden ||
      m.w2.rows() != c.hidden || m.w2.cols() != meta.at("num_classes").get<std::size_t>())
    throw std::runtime_error("model weights in " + dir.string() + " do not match meta.json shapes");
  return m;
}

}  // namespace geattack::gcn
