#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "geattack/autodiff/tape.hpp"
#include "geattack/graph/graph.hpp"

namespace geattack::gcn {

using ad::DenseMatrix;
using ad::DiffValue;

enum class Optimizer { GradientDescent, Adam };

struct TrainConfig {
  std::size_t hidden = 16;
  double lr = 0.01;
  int epochs = 200;
  double weight_decay = 5e-4;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::Adam;
  bool dropout = false;
  double dropout_rate = 0.5;
};

struct TrainRecord {
  int best_epoch = 0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  std::vector<double> loss_history;  // loss before each update, then the final loss
};

/// Frozen two-layer GCN: softmax(Ã relu(Ã X W1) W2).
struct GcnModel {
  DenseMatrix w1;  // d x h
  DenseMatrix w2;  // h x C
  TrainConfig config;
  TrainRecord record;

  std::size_t input_dim() const noexcept { return w1.rows(); }
  std::size_t hidden_dim() const noexcept { return w1.cols(); }
  std::size_t num_classes() const noexcept { return w2.cols(); }
};

struct Prediction {
  std::size_t node = 0;
  std::vector<double> probs;
  int label = 0;

  /// Probability of the predicted class minus the runner-up.
  double margin() const;
};

/// Ã = D̃^{-1/2}(A + I)D̃^{-1/2} with D̃_ii = 1 + sum_j A_ij, differentiable
/// through D̃.
DiffValue normalize_adjacency(const DiffValue& a);
DenseMatrix normalize_adjacency(const DenseMatrix& a);

DiffValue gcn_forward(const DiffValue& w1, const DiffValue& w2, const DiffValue& a,
                      const DiffValue& x);
/// Records the model weights as constants on the tape of `a`.
DiffValue gcn_forward(const GcnModel& model, const DiffValue& a, const DiffValue& x);

/// Output row of node v (1 x C) given a precomputed X W1. Only row v of the
/// second propagation is formed.
DiffValue node_probs(const GcnModel& model, const DiffValue& a, const DiffValue& xw1, std::size_t v);

/// -ln(max(probs[node][label], 1e-12)).
DiffValue nll_loss(const DiffValue& probs, std::size_t node, int label);

DenseMatrix input_projection(const GcnModel& model, const DenseMatrix& features);
DenseMatrix forward_values(const GcnModel& model, const DenseMatrix& adjacency,
                           const DenseMatrix& features);
DenseMatrix node_probs_values(const GcnModel& model, const DenseMatrix& adjacency,
                              const DenseMatrix& xw1, std::size_t v);

/// Seeded uniform ±1/sqrt(fan_in) weights.
GcnModel init_model(std::size_t input_dim, std::size_t num_classes, const TrainConfig& config);

/// Full-batch training on the train split, weight decay on both layers,
/// returning the weights with the best validation accuracy (latest on ties).
GcnModel train_gcn(const graph::Graph& g, const TrainConfig& config);

/// Argmax with ties to the lowest class.
int argmax_row(const DenseMatrix& probs, std::size_t row);

Prediction predict(const GcnModel& model, const graph::Graph& g, std::size_t v);
Prediction prediction_from(const DenseMatrix& probs, std::size_t row, std::size_t node);
std::vector<int> predict_labels(const GcnModel& model, const DenseMatrix& adjacency,
                                const DenseMatrix& features);
double accuracy(const std::vector<int>& predicted, const std::vector<int>& labels,
                const std::vector<std::size_t>& nodes);

/// Directory with meta.json, w1.csv and w2.csv.
void save_model(const GcnModel& model, const std::filesystem::path& dir);
GcnModel load_model(const std::filesystem::path& dir);

std::string to_string(Optimizer o);
Optimizer optimizer_from_string(const std::string& s);

}  // namespace geattack::gcn
